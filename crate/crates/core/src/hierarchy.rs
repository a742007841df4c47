//! Auxiliary-state index space under triangular truncation.
//!
//! Multi-indices k with |k| <= K are enumerated in graded lexicographic
//! order and linked to their raising/lowering neighbors k +- e_j through
//! flat tables, so the right-hand-side assembly never searches.

use std::collections::HashMap;

use crate::{HopsError, Result};

pub const NO_NEIGHBOR: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct HierarchySpace {
    n_modes: usize,
    order: usize,
    /// Multi-indices, n_indices x n_modes, graded-lex order.
    kvecs: Vec<u16>,
    grades: Vec<u16>,
    up: Vec<u32>,
    down: Vec<u32>,
    positions: HashMap<Vec<u16>, u32>,
}

/// Binomial coefficient as u128 (saturating against overflow).
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn compositions(total: u16, slots: usize, prefix: &mut Vec<u16>, out: &mut Vec<u16>) {
    if slots == 1 {
        out.extend_from_slice(prefix);
        out.push(total);
        return;
    }
    for v in (0..=total).rev() {
        prefix.push(v);
        compositions(total - v, slots - 1, prefix, out);
        prefix.pop();
    }
}

/// Enumerate all multi-indices with |k| <= order for `n_modes` modes.
///
/// Fails before allocation when the index count exceeds `max_indices`.
pub fn build_space(n_modes: usize, order: usize, max_indices: usize) -> Result<HierarchySpace> {
    let count = binomial((order + n_modes) as u64, n_modes as u64);
    if count > max_indices as u128 {
        return Err(HopsError::Budget { needed: count, budget: max_indices });
    }
    let n_idx = count as usize;
    if n_modes == 0 {
        let mut positions = HashMap::new();
        positions.insert(Vec::new(), 0);
        return Ok(HierarchySpace {
            n_modes,
            order,
            kvecs: Vec::new(),
            grades: vec![0],
            up: Vec::new(),
            down: Vec::new(),
            positions,
        });
    }
    if order > u16::MAX as usize {
        return Err(HopsError::InvalidInput("truncation order too large".into()));
    }
    let mut kvecs = Vec::with_capacity(n_idx * n_modes);
    let mut grades = Vec::with_capacity(n_idx);
    for s in 0..=order as u16 {
        let before = kvecs.len();
        compositions(s, n_modes, &mut Vec::new(), &mut kvecs);
        grades.extend(std::iter::repeat(s).take((kvecs.len() - before) / n_modes));
    }
    debug_assert_eq!(kvecs.len(), n_idx * n_modes);

    let mut positions: HashMap<Vec<u16>, u32> = HashMap::with_capacity(n_idx);
    for idx in 0..n_idx {
        positions.insert(kvecs[idx * n_modes..(idx + 1) * n_modes].to_vec(), idx as u32);
    }

    let mut up = vec![NO_NEIGHBOR; n_idx * n_modes];
    let mut down = vec![NO_NEIGHBOR; n_idx * n_modes];
    let mut probe = vec![0u16; n_modes];
    for idx in 0..n_idx {
        let k = &kvecs[idx * n_modes..(idx + 1) * n_modes];
        for j in 0..n_modes {
            if (grades[idx] as usize) < order {
                probe.copy_from_slice(k);
                probe[j] += 1;
                up[idx * n_modes + j] = positions[&probe];
            }
            if k[j] > 0 {
                probe.copy_from_slice(k);
                probe[j] -= 1;
                down[idx * n_modes + j] = positions[&probe];
            }
        }
    }
    Ok(HierarchySpace { n_modes, order, kvecs, grades, up, down, positions })
}

impl HierarchySpace {
    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn kvec(&self, idx: usize) -> &[u16] {
        &self.kvecs[idx * self.n_modes..(idx + 1) * self.n_modes]
    }

    #[inline]
    pub fn grade(&self, idx: usize) -> usize {
        self.grades[idx] as usize
    }

    #[inline]
    pub fn up(&self, idx: usize, j: usize) -> Option<usize> {
        match self.up[idx * self.n_modes + j] {
            NO_NEIGHBOR => None,
            p => Some(p as usize),
        }
    }

    #[inline]
    pub fn down(&self, idx: usize, j: usize) -> Option<usize> {
        match self.down[idx * self.n_modes + j] {
            NO_NEIGHBOR => None,
            p => Some(p as usize),
        }
    }

    pub fn position(&self, k: &[u16]) -> Option<usize> {
        self.positions.get(k).map(|&p| p as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_mode_order_eight_has_nine_indices() {
        let s = build_space(1, 8, 1 << 20).unwrap();
        assert_eq!(s.len(), 9);
        for idx in 0..9 {
            assert_eq!(s.kvec(idx), &[idx as u16]);
        }
    }

    #[test]
    fn two_modes_order_two_enumeration() {
        let s = build_space(2, 2, 1 << 20).unwrap();
        assert_eq!(s.len(), 6);
        let expect: [&[u16]; 6] = [&[0, 0], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]];
        for (idx, e) in expect.iter().enumerate() {
            assert_eq!(s.kvec(idx), *e);
        }
    }

    #[test]
    fn three_modes_order_four_count() {
        let s = build_space(3, 4, 1 << 20).unwrap();
        assert_eq!(s.len(), 35);
    }

    #[test]
    fn budget_exceeded_before_allocation() {
        let err = build_space(10, 12, 1000).unwrap_err();
        match err {
            crate::HopsError::Budget { needed, budget } => {
                assert_eq!(needed, binomial(22, 10));
                assert_eq!(budget, 1000);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn no_modes_is_a_single_empty_index() {
        let s = build_space(0, 5, 16).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.kvec(0), &[] as &[u16]);
    }

    #[test]
    fn neighbor_tables_fuzz() {
        // random spaces with M <= 4, K <= 5: every edge present and inverse
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        for _ in 0..25 {
            let m = rng.gen_range(1..=4usize);
            let k = rng.gen_range(0..=5usize);
            let s = build_space(m, k, 1 << 22).unwrap();
            assert_eq!(s.len() as u128, binomial((m + k) as u64, m as u64));
            for idx in 0..s.len() {
                let kv = s.kvec(idx).to_vec();
                for j in 0..m {
                    match s.up(idx, j) {
                        Some(u) => {
                            assert!(s.grade(idx) < k);
                            let mut expect = kv.clone();
                            expect[j] += 1;
                            assert_eq!(s.kvec(u), &expect[..]);
                            // down(up(k, j), j) == k
                            assert_eq!(s.down(u, j), Some(idx));
                        }
                        None => assert_eq!(s.grade(idx), k),
                    }
                    match s.down(idx, j) {
                        Some(d) => {
                            let mut expect = kv.clone();
                            expect[j] -= 1;
                            assert_eq!(s.kvec(d), &expect[..]);
                            assert_eq!(s.up(d, j), Some(idx));
                        }
                        None => assert_eq!(kv[j], 0),
                    }
                }
            }
        }
    }
}
