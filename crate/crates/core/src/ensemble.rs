//! Ensemble averaging of stochastic trajectories.
//!
//! The reduced density matrix is the mean outer product of the physical
//! trajectory component: raw states for the linear variant, normalized
//! states for the nonlinear one. Trajectories are independent, so the run
//! is data-parallel over fixed id chunks. Chunk accumulators are merged in
//! ascending chunk order, which makes the sum bit-identical to a
//! sequential run for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::linalg::C64;
use crate::noise::{NoiseGenerator, NoiseOptions};
use crate::trajectory::{
    integrate_trajectory, IntegrationOptions, SystemSpec, Terminator, Trajectory, Variant,
};
use crate::hierarchy::HierarchySpace;
use crate::{HopsError, Result};

/// Trajectories per deterministic work unit.
const CHUNK: u64 = 32;

#[derive(Clone, Debug)]
pub struct EnsembleOptions {
    pub n_traj: u64,
    pub seed: u64,
    pub variant: Variant,
    pub terminator: Terminator,
    pub dt: f64,
    pub t_max: f64,
    /// Worker threads; 0 picks the library default. With the `parallel`
    /// feature disabled everything runs on the calling thread.
    pub workers: usize,
    /// Fraction of aborted trajectories tolerated before the run fails.
    pub abort_tolerance: f64,
    pub noise: NoiseOptions,
}

impl EnsembleOptions {
    pub fn new(n_traj: u64, seed: u64, variant: Variant, dt: f64, t_max: f64) -> Self {
        EnsembleOptions {
            n_traj,
            seed,
            variant,
            terminator: Terminator::Rescaled,
            dt,
            t_max,
            workers: 0,
            abort_tolerance: 0.01,
            noise: NoiseOptions::default(),
        }
    }
}

/// Mergeable running sums for the density matrix and its spread.
#[derive(Clone, Debug)]
pub struct EnsembleAccumulator {
    pub n: u64,
    pub dim: usize,
    pub times: Vec<f64>,
    /// Sum of projectors, layout t-major: [t][i][j].
    pub sum_rho: Vec<C64>,
    /// Sum of |projector entry|^2 for the standard error.
    pub sum_sq: Vec<f64>,
}

impl EnsembleAccumulator {
    pub fn empty(times: Vec<f64>, dim: usize) -> Self {
        let len = times.len() * dim * dim;
        EnsembleAccumulator {
            n: 0,
            dim,
            times,
            sum_rho: vec![C64::new(0.0, 0.0); len],
            sum_sq: vec![0.0; len],
        }
    }

    /// Accumulate one trajectory as outer products of its physical
    /// component; `normalize` selects the nonlinear-variant average.
    pub fn add_trajectory(&mut self, traj: &Trajectory, normalize: bool) -> Result<()> {
        if traj.times.len() != self.times.len() || traj.dim != self.dim {
            return Err(HopsError::Dimension("trajectory grid mismatch".into()));
        }
        let d = self.dim;
        for (step, _) in traj.times.iter().enumerate() {
            let psi = traj.psi0_at(step);
            let base = step * d * d;
            let weight = if normalize {
                let n2 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>();
                if n2 <= 0.0 {
                    return Err(HopsError::Trajectory(
                        "cannot normalize zero state".into(),
                    ));
                }
                1.0 / n2
            } else {
                1.0
            };
            for i in 0..d {
                for j in 0..d {
                    let v = weight * psi[i] * psi[j].conj();
                    self.sum_rho[base + i * d + j] += v;
                    self.sum_sq[base + i * d + j] += v.norm_sqr();
                }
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Entrywise sum; commutative and associative by construction.
    pub fn merge(mut self, other: &EnsembleAccumulator) -> Result<EnsembleAccumulator> {
        if other.n == 0 {
            return Ok(self);
        }
        if self.dim != other.dim || self.times.len() != other.times.len() {
            return Err(HopsError::Dimension("accumulator grid mismatch".into()));
        }
        for (a, b) in self.sum_rho.iter_mut().zip(&other.sum_rho) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.n += other.n;
        Ok(self)
    }

    pub fn mean(&self) -> Vec<C64> {
        let inv = 1.0 / self.n.max(1) as f64;
        self.sum_rho.iter().map(|&x| inv * x).collect()
    }

    /// Per-entry, per-time sample standard error of the mean.
    pub fn standard_error(&self) -> Result<Vec<f64>> {
        if self.n < 2 {
            return Err(HopsError::InvalidInput(
                "standard error needs at least two trajectories".into(),
            ));
        }
        let n = self.n as f64;
        Ok(self
            .sum_rho
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &sq)| {
                let mean_sq = (s / n).norm_sqr();
                let var = ((sq / n - mean_sq) * n / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect())
    }
}

/// Ensemble-averaged density matrix with statistical errors.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    /// [t][i][j]
    pub rho: Vec<C64>,
    pub stderr: Vec<f64>,
    pub n_used: u64,
    pub n_aborted: u64,
}

impl DensityTrajectory {
    pub fn rho_at(&self, step: usize) -> &[C64] {
        &self.rho[step * self.dim * self.dim..(step + 1) * self.dim * self.dim]
    }
}

struct ChunkOutcome {
    acc: EnsembleAccumulator,
    aborts: Vec<(u64, String)>,
}

fn times_grid(dt: f64, t_max: f64) -> Vec<f64> {
    let n_steps = (t_max / dt + 1e-9).floor() as usize;
    (0..=n_steps).map(|i| i as f64 * dt).collect()
}

fn run_chunk(
    sys: &SystemSpec,
    space: &HierarchySpace,
    generators: &[NoiseGenerator],
    psi0: &[C64],
    opts: &EnsembleOptions,
    chunk: u64,
) -> Result<ChunkOutcome> {
    let times = times_grid(opts.dt, opts.t_max);
    let mut acc = EnsembleAccumulator::empty(times, sys.dim());
    let mut aborts = Vec::new();
    let lo = chunk * CHUNK;
    let hi = (lo + CHUNK).min(opts.n_traj);
    let int_opts = IntegrationOptions {
        dt: opts.dt,
        t_max: opts.t_max,
        variant: opts.variant,
        terminator: opts.terminator,
        rescale_floor: 1e-2,
        rescale_ceil: 1e2,
        record_diagnostics: false,
    };
    for id in lo..hi {
        let noise: Vec<_> = generators
            .iter()
            .enumerate()
            .map(|(env, g)| g.sample(opts.seed, id, env as u32))
            .collect();
        match integrate_trajectory(sys, space, &noise, psi0, &int_opts) {
            Ok(traj) => {
                acc.add_trajectory(&traj, opts.variant == Variant::Nonlinear)?;
            }
            Err(e) => aborts.push((id, e.to_string())),
        }
    }
    Ok(ChunkOutcome { acc, aborts })
}

fn finalize(
    mut outcomes: Vec<Result<ChunkOutcome>>,
    sys: &SystemSpec,
    opts: &EnsembleOptions,
) -> Result<DensityTrajectory> {
    let times = times_grid(opts.dt, opts.t_max);
    let mut acc = EnsembleAccumulator::empty(times, sys.dim());
    let mut aborts: Vec<(u64, String)> = Vec::new();
    for outcome in outcomes.drain(..) {
        let o = outcome?;
        acc = acc.merge(&o.acc)?;
        aborts.extend(o.aborts);
    }
    let n_aborted = aborts.len() as u64;
    if n_aborted as f64 > opts.abort_tolerance * opts.n_traj as f64 {
        let (id, msg) = &aborts[0];
        return Err(HopsError::Trajectory(format!(
            "{n_aborted} of {} trajectories aborted (tolerance {}); first: id {id}: {msg}",
            opts.n_traj, opts.abort_tolerance
        )));
    }
    if acc.n == 0 {
        return Err(HopsError::Trajectory("no trajectory completed".into()));
    }
    let stderr = if acc.n >= 2 { acc.standard_error()? } else { vec![0.0; acc.sum_rho.len()] };
    Ok(DensityTrajectory {
        times: acc.times.clone(),
        dim: acc.dim,
        rho: acc.mean(),
        stderr,
        n_used: acc.n,
        n_aborted,
    })
}

fn prepare(
    sys: &SystemSpec,
    space: &HierarchySpace,
    psi0: &[C64],
    opts: &EnsembleOptions,
) -> Result<(Vec<NoiseGenerator>, u64)> {
    sys.validate()?;
    if opts.n_traj == 0 {
        return Err(HopsError::InvalidInput("ensemble needs at least one trajectory".into()));
    }
    if psi0.len() != sys.dim() {
        return Err(HopsError::Dimension("initial state dimension mismatch".into()));
    }
    if sys.n_modes() != space.n_modes() {
        return Err(HopsError::Dimension(
            "hierarchy space does not match the system's mode count".into(),
        ));
    }
    let generators: Result<Vec<_>> = sys
        .couplings
        .iter()
        .map(|c| NoiseGenerator::new(&c.bath, opts.t_max, opts.dt / 2.0, &opts.noise))
        .collect();
    let n_chunks = opts.n_traj.div_ceil(CHUNK);
    Ok((generators?, n_chunks))
}

/// Run the ensemble on the calling thread.
///
/// The result is bitwise identical to the parallel runner: accumulation
/// order is fixed by trajectory id either way.
pub fn run_ensemble_sequential(
    sys: &SystemSpec,
    space: &HierarchySpace,
    psi0: &[C64],
    opts: &EnsembleOptions,
) -> Result<DensityTrajectory> {
    let (generators, n_chunks) = prepare(sys, space, psi0, opts)?;
    let outcomes: Vec<Result<ChunkOutcome>> = (0..n_chunks)
        .map(|c| run_chunk(sys, space, &generators, psi0, opts, c))
        .collect();
    finalize(outcomes, sys, opts)
}

/// Run the ensemble across worker threads (with the `parallel` feature),
/// falling back to the sequential path otherwise.
pub fn run_ensemble(
    sys: &SystemSpec,
    space: &HierarchySpace,
    psi0: &[C64],
    opts: &EnsembleOptions,
) -> Result<DensityTrajectory> {
    #[cfg(feature = "parallel")]
    {
        let (generators, n_chunks) = prepare(sys, space, psi0, opts)?;
        let work = || -> Vec<Result<ChunkOutcome>> {
            (0..n_chunks)
                .into_par_iter()
                .map(|c| run_chunk(sys, space, &generators, psi0, opts, c))
                .collect()
        };
        let outcomes = if opts.workers > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| HopsError::InvalidInput(format!("worker pool: {e}")))?;
            pool.install(work)
        } else {
            work()
        };
        finalize(outcomes, sys, opts)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_ensemble_sequential(sys, space, psi0, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, ExpTerm};
    use crate::hierarchy::build_space;
    use crate::linalg::Op;
    use crate::models;
    use crate::trajectory::Coupling;
    use approx::assert_relative_eq;

    fn fig_bath() -> BathSpec {
        BathSpec::new(
            vec![ExpTerm::new(C64::new(2.0, 0.0), C64::new(0.5, 2.0)).unwrap()],
            0.0,
        )
        .unwrap()
    }

    fn up_state() -> Vec<C64> {
        vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 3, 64).unwrap();
        let opts = EnsembleOptions::new(8, 3, Variant::Nonlinear, 0.02, 0.5);
        let (gens, _) = prepare(&sys, &space, &up_state(), &opts).unwrap();
        let a = run_chunk(&sys, &space, &gens, &up_state(), &opts, 0).unwrap().acc;
        let mut opts_b = opts.clone();
        opts_b.seed = 77;
        let (gens_b, _) = prepare(&sys, &space, &up_state(), &opts_b).unwrap();
        let b = run_chunk(&sys, &space, &gens_b, &up_state(), &opts_b, 0).unwrap().acc;

        let empty = EnsembleAccumulator::empty(a.times.clone(), a.dim);
        let a_plus_empty = a.clone().merge(&empty).unwrap();
        assert_eq!(a_plus_empty.sum_rho, a.sum_rho);
        assert_eq!(a_plus_empty.n, a.n);

        let ab = a.clone().merge(&b).unwrap();
        let ba = b.clone().merge(&a).unwrap();
        assert_eq!(ab.sum_rho, ba.sum_rho);
        assert_eq!(ab.sum_sq, ba.sum_sq);
        assert_eq!(ab.n, ba.n);
    }

    #[test]
    fn single_unitary_trajectory_is_pure_projector() {
        // N = 1, no coupling: rho is the unitary pure-state projector
        let sys = crate::trajectory::SystemSpec::new(
            models::sigma_x().scaled(C64::new(-0.5, 0.0)),
            vec![],
        )
        .unwrap();
        let space = build_space(0, 0, 4).unwrap();
        let opts = EnsembleOptions::new(1, 1, Variant::Nonlinear, 0.01, 2.0);
        let rho = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
        for step in 0..rho.times.len() {
            let r = rho.rho_at(step);
            let trace = (r[0] + r[3]).re;
            assert_relative_eq!(trace, 1.0, epsilon = 1e-12);
            // purity of a pure-state projector
            let purity =
                (r[0] * r[0] + r[1] * r[2] + r[2] * r[1] + r[3] * r[3]).re;
            assert_relative_eq!(purity, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn parallel_equals_sequential_bitwise() {
        let sys = models::spin_boson(1.0, 0.2, fig_bath());
        let space = build_space(1, 4, 64).unwrap();
        let mut opts = EnsembleOptions::new(70, 9, Variant::Nonlinear, 0.02, 1.0);
        let seq = run_ensemble_sequential(&sys, &space, &up_state(), &opts).unwrap();
        for workers in [1usize, 2, 8] {
            opts.workers = workers;
            let par = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
            assert_eq!(par.rho, seq.rho, "workers = {workers}");
            assert_eq!(par.stderr, seq.stderr);
        }
    }

    #[test]
    fn hermiticity_and_unit_trace_nonlinear() {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 4, 64).unwrap();
        let opts = EnsembleOptions::new(64, 5, Variant::Nonlinear, 0.02, 1.0);
        let rho = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
        for step in 0..rho.times.len() {
            let r = rho.rho_at(step);
            assert!((r[1] - r[2].conj()).norm() < 1e-14);
            assert_relative_eq!((r[0] + r[3]).re, 1.0, epsilon = 1e-12);
            // diagonal of an average of projectors stays in [0, 1]
            assert!(r[0].re >= 0.0 && r[0].re <= 1.0);
        }
    }

    #[test]
    fn linear_trace_within_statistical_error() {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 4, 64).unwrap();
        let opts = EnsembleOptions::new(512, 21, Variant::Linear, 0.02, 1.0);
        let rho = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
        for step in 0..rho.times.len() {
            let r = rho.rho_at(step);
            let trace = (r[0] + r[3]).re;
            let se = rho.stderr[step * 4] + rho.stderr[step * 4 + 3];
            assert!(
                (trace - 1.0).abs() <= 5.0 * se + 1e-12,
                "trace {trace} at step {step}, 5 SE = {}",
                5.0 * se
            );
        }
    }

    #[test]
    fn standard_error_shrinks_like_sqrt_n() {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 4, 64).unwrap();
        let run = |n: u64| {
            let opts = EnsembleOptions::new(n, 13, Variant::Nonlinear, 0.02, 1.0);
            run_ensemble(&sys, &space, &up_state(), &opts).unwrap()
        };
        let small = run(1000);
        let large = run(4000);
        let last = small.times.len() - 1;
        let se_small = small.stderr[last * 4]; // rho_00 spread at final time
        let se_large = large.stderr[last * 4];
        let ratio = se_small / se_large;
        assert!(
            (ratio - 2.0).abs() < 0.4,
            "expected ~2x shrink from 4x samples, got {ratio}"
        );
    }

    #[test]
    fn all_aborting_run_fails() {
        // nonlinear variant from the zero state: every trajectory aborts
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 2, 16).unwrap();
        let opts = EnsembleOptions::new(4, 3, Variant::Nonlinear, 0.02, 0.2);
        let zero = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert!(run_ensemble(&sys, &space, &zero, &opts).is_err());
    }

    #[test]
    fn zero_trajectories_rejected() {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let space = build_space(1, 2, 16).unwrap();
        let opts = EnsembleOptions::new(0, 3, Variant::Nonlinear, 0.02, 0.2);
        assert!(run_ensemble(&sys, &space, &up_state(), &opts).is_err());
    }

    #[test]
    fn standard_error_identical_trajectories_is_zero() {
        // L = 0 so every id yields the same deterministic trajectory
        let sys = crate::trajectory::SystemSpec::new(
            models::sigma_z().scaled(C64::new(0.5, 0.0)),
            vec![Coupling { op: Op::zeros(2), bath: fig_bath() }],
        )
        .unwrap();
        let space = build_space(1, 2, 16).unwrap();
        let opts = EnsembleOptions::new(16, 8, Variant::Nonlinear, 0.02, 0.3);
        let rho = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
        // identical inputs leave only one-pass cancellation residue ~ sqrt(eps)
        assert!(rho.stderr.iter().all(|&e| e < 1e-7), "max {}",
            rho.stderr.iter().cloned().fold(0.0, f64::max));
    }
}
