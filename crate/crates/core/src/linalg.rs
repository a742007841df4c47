//! Small dense complex matrices and vector helpers.
//!
//! System operators here are tiny (a handful of levels), so everything is
//! stored row-major in flat vectors and multiplied with straightforward
//! loops. Eigendecompositions go through nalgebra.

use num_complex::Complex64;

use crate::{HopsError, Result};

pub type C64 = Complex64;

/// Dense complex square matrix, row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Op {
    dim: usize,
    data: Vec<C64>,
}

impl Op {
    pub fn zeros(dim: usize) -> Self {
        Op { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Op::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(HopsError::Dimension(format!(
                "matrix data length {} does not match dim {}",
                data.len(),
                dim
            )));
        }
        Ok(Op { dim, data })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(HopsError::Dimension(format!(
                "matrix data length {} does not match dim {}",
                data.len(),
                dim
            )));
        }
        Ok(Op { dim, data: data.iter().map(|&x| C64::new(x, 0.0)).collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn adjoint(&self) -> Op {
        let d = self.dim;
        let mut out = Op::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn scaled(&self, alpha: C64) -> Op {
        Op { dim: self.dim, data: self.data.iter().map(|&x| alpha * x).collect() }
    }

    pub fn add(&self, other: &Op) -> Op {
        assert_eq!(self.dim, other.dim);
        Op {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Op) -> Op {
        assert_eq!(self.dim, other.dim);
        Op {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Op) -> Op {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Op::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                let row_b = &other.data[k * d..(k + 1) * d];
                let row_o = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in row_o.iter_mut().zip(row_b) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn kron(&self, other: &Op) -> Op {
        let da = self.dim;
        let db = other.dim;
        let d = da * db;
        let mut out = Op::zeros(d);
        for ia in 0..da {
            for ja in 0..da {
                let a = self.data[ia * da + ja];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        out.data[(ia * db + ib) * d + (ja * db + jb)] =
                            a * other.data[ib * db + jb];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// y = A x
    #[inline]
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let d = self.dim;
        debug_assert!(x.len() >= d && y.len() >= d);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut acc = C64::new(0.0, 0.0);
            for (a, xv) in row.iter().zip(x.iter()) {
                acc += a * xv;
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A x
    #[inline]
    pub fn gaxpy(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        let d = self.dim;
        debug_assert!(x.len() >= d && y.len() >= d);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut acc = C64::new(0.0, 0.0);
            for (a, xv) in row.iter().zip(x.iter()) {
                acc += a * xv;
            }
            y[i] += alpha * acc;
        }
    }

    /// <psi|A|psi> without normalization.
    pub fn quadratic_form(&self, psi: &[C64]) -> C64 {
        let d = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut ax = C64::new(0.0, 0.0);
            for (a, x) in row.iter().zip(psi.iter()) {
                ax += a * x;
            }
            acc += psi[i].conj() * ax;
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Op) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(1e-300);
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                let diff = (self.data[i * d + j] - self.data[j * d + i].conj()).norm();
                if diff > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Op) {
        let d = self.dim;
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| self.at(i, j));
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = Op::zeros(d);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..d {
                vectors.set(row, col, eig.eigenvectors[(row, src)]);
            }
        }
        (values, vectors)
    }
}

/// <a|b> with the physics convention (conjugate-linear in the first slot).
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yv, xv) in y.iter_mut().zip(x.iter()) {
        *yv += alpha * xv;
    }
}

#[inline]
pub fn scale(alpha: C64, x: &mut [C64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}
