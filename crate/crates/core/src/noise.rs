//! Colored complex Gaussian noise by spectral synthesis.
//!
//! The driving process has mean zero, vanishing pseudo-covariance and
//! covariance E[z(t) z*(s)] = alpha(t-s). It is synthesized as a finite
//! sum of harmonics with independent standard complex Gaussian weights,
//! z(t) = sum_k a_k xi_k exp(-i w_k t), where a_k^2 is the exact spectral
//! mass of band k. The spectrum of a multi-exponential correlation is
//! S(w) = 2 sum_j Re[g_j / (w_j - i w)], with closed-form band integrals.
//!
//! Streams are counter-based: a path is a pure function of
//! (seed, trajectory_id, channel), independent of worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bath::BathSpec;
use crate::linalg::C64;
use crate::{HopsError, Result};

/// One realization of the conjugate driving process on a uniform grid.
#[derive(Clone, Debug)]
pub struct NoisePath {
    /// Grid step (half the integrator step, so midpoints are exact samples).
    pub dt: f64,
    /// Samples of z*(t_n), n = 0..len-1.
    pub samples: Vec<C64>,
    pub seed: u64,
    pub trajectory_id: u64,
}

impl NoisePath {
    pub fn zeros(dt: f64, len: usize) -> Self {
        NoisePath { dt, samples: vec![C64::new(0.0, 0.0); len], seed: 0, trajectory_id: 0 }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct NoiseOptions {
    /// Grid reaches omega_max = max_j(|Omega_j| + factor * gamma_j).
    pub omega_max_factor: f64,
    /// Spectral values below -clip_tol * max(S) abort; mild dips are clipped.
    pub clip_tol: f64,
    /// Synthesis period as a multiple of the path length.
    pub period_factor: f64,
    /// Frequency resolution as a fraction of the narrowest linewidth.
    pub resolution_divisor: f64,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        NoiseOptions {
            omega_max_factor: 10.0,
            clip_tol: 1e-8,
            period_factor: 4.0,
            resolution_divisor: 8.0,
        }
    }
}

/// Precomputed synthesis table for one bath and time grid.
#[derive(Clone, Debug)]
pub struct NoiseGenerator {
    dt: f64,
    n_samples: usize,
    omegas: Vec<f64>,
    amps: Vec<f64>,
    /// Fraction of total spectral mass removed by clipping negative bands.
    pub clipped_fraction: f64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn stream_seed(seed: u64, trajectory_id: u64, channel: u32) -> [u8; 32] {
    let mut state = splitmix64(&mut { seed ^ 0x486F_7073_4E6F_6973 });
    state ^= trajectory_id.wrapping_mul(0xD129_0B26_25ED_37C5) | 1;
    state = splitmix64(&mut state);
    state ^= (channel as u64).wrapping_mul(0xA076_1D64_78BD_642F) | 1;
    let mut out = [0u8; 32];
    for chunk in out.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// Spectrum S(omega) of the expansion, >= 0 for a valid correlation.
pub fn spectrum(bath: &BathSpec, omega: f64) -> f64 {
    2.0 * bath
        .terms
        .iter()
        .map(|t| (t.g / (t.w - C64::new(0.0, 1.0) * omega)).re)
        .sum::<f64>()
}

/// Exact integral of S over [a, b]: antiderivative 2 Re[i g ln(w - i omega)].
fn band_mass(bath: &BathSpec, a: f64, b: f64) -> f64 {
    let i = C64::new(0.0, 1.0);
    bath.terms
        .iter()
        .map(|t| 2.0 * (i * t.g * ((t.w - i * b).ln() - (t.w - i * a).ln())).re)
        .sum()
}

impl NoiseGenerator {
    pub fn new(bath: &BathSpec, t_max: f64, dt: f64, opts: &NoiseOptions) -> Result<Self> {
        if !(dt > 0.0) || t_max < dt {
            return Err(HopsError::InvalidInput(format!(
                "invalid noise grid: dt = {dt}, t_max = {t_max}"
            )));
        }
        let n_samples = (t_max / dt + 1e-9).floor() as usize + 1;
        if bath.is_empty() {
            return Ok(NoiseGenerator {
                dt,
                n_samples,
                omegas: Vec::new(),
                amps: Vec::new(),
                clipped_fraction: 0.0,
            });
        }
        let omega_max = bath
            .terms
            .iter()
            .map(|t| t.w.im.abs() + opts.omega_max_factor * t.w.re)
            .fold(0.0, f64::max);
        let gamma_min = bath.terms.iter().map(|t| t.w.re).fold(f64::INFINITY, f64::min);
        let d_omega = (2.0 * std::f64::consts::PI / (opts.period_factor * t_max))
            .min(gamma_min / opts.resolution_divisor);
        let n_modes = ((2.0 * omega_max) / d_omega).ceil() as usize;
        let d_omega = 2.0 * omega_max / n_modes as f64;

        let mut omegas = Vec::with_capacity(n_modes);
        let mut masses = Vec::with_capacity(n_modes);
        let mut s_max: f64 = 0.0;
        for k in 0..n_modes {
            let a = -omega_max + k as f64 * d_omega;
            let center = a + 0.5 * d_omega;
            omegas.push(center);
            masses.push(band_mass(bath, a, a + d_omega) / (2.0 * std::f64::consts::PI));
            s_max = s_max.max(spectrum(bath, center));
        }
        let mut clipped = 0.0;
        let mut total = 0.0;
        for (k, m) in masses.iter_mut().enumerate() {
            let s_here = spectrum(bath, omegas[k]);
            if s_here < -opts.clip_tol * s_max {
                return Err(HopsError::InvalidInput(format!(
                    "spectral function negative at omega = {}: S = {s_here:e}, \
                     expansion is not a valid correlation",
                    omegas[k]
                )));
            }
            total += m.abs();
            if *m < 0.0 {
                clipped += -*m;
                *m = 0.0;
            }
        }
        let amps = masses.iter().map(|&m| m.sqrt()).collect();
        Ok(NoiseGenerator {
            dt,
            n_samples,
            omegas,
            amps,
            clipped_fraction: if total > 0.0 { clipped / total } else { 0.0 },
        })
    }

    pub fn grid(&self) -> (f64, usize) {
        (self.dt, self.n_samples)
    }

    /// Draw one path; deterministic in (seed, trajectory_id, channel).
    pub fn sample(&self, seed: u64, trajectory_id: u64, channel: u32) -> NoisePath {
        let mut rng = ChaCha12Rng::from_seed(stream_seed(seed, trajectory_id, channel));
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        // z*(t) = sum_k a_k conj(xi_k) e^{+i w_k t}
        let mut phases: Vec<C64> = Vec::with_capacity(self.amps.len());
        let mut rotors: Vec<C64> = Vec::with_capacity(self.amps.len());
        for (&a, &w) in self.amps.iter().zip(&self.omegas) {
            let xr: f64 = StandardNormal.sample(&mut rng);
            let xi: f64 = StandardNormal.sample(&mut rng);
            let xi_conj = C64::new(xr, -xi) * inv_sqrt2;
            phases.push(a * xi_conj);
            rotors.push(C64::new(0.0, w * self.dt).exp());
        }
        let mut samples = Vec::with_capacity(self.n_samples);
        for _ in 0..self.n_samples {
            let s: C64 = phases.iter().sum();
            samples.push(s);
            for (p, r) in phases.iter_mut().zip(&rotors) {
                *p *= r;
            }
        }
        NoisePath { dt: self.dt, samples, seed, trajectory_id }
    }

    /// Evaluate one path only at the given times (cheap for statistics).
    pub fn sample_at(
        &self,
        seed: u64,
        trajectory_id: u64,
        channel: u32,
        times: &[f64],
    ) -> Vec<C64> {
        let mut rng = ChaCha12Rng::from_seed(stream_seed(seed, trajectory_id, channel));
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let coeffs: Vec<C64> = self
            .amps
            .iter()
            .map(|&a| {
                let xr: f64 = StandardNormal.sample(&mut rng);
                let xi: f64 = StandardNormal.sample(&mut rng);
                a * C64::new(xr, -xi) * inv_sqrt2
            })
            .collect();
        times
            .iter()
            .map(|&t| {
                coeffs
                    .iter()
                    .zip(&self.omegas)
                    .map(|(c, &w)| c * C64::new(0.0, w * t).exp())
                    .sum()
            })
            .collect()
    }
}

/// Generate one realization with default synthesis options.
pub fn generate_noise(
    bath: &BathSpec,
    t_max: f64,
    dt: f64,
    seed: u64,
    trajectory_id: u64,
) -> Result<NoisePath> {
    let gen = NoiseGenerator::new(bath, t_max, dt, &NoiseOptions::default())?;
    Ok(gen.sample(seed, trajectory_id, 0))
}

/// One row of the statistics report.
#[derive(Clone, Debug)]
pub struct StatRow {
    pub kind: &'static str,
    pub t: f64,
    pub s: f64,
    pub empirical: C64,
    pub target: C64,
    pub std_error: f64,
    pub deviation: f64,
}

/// Deviations of empirical path statistics from their targets,
/// in units of the standard error.
#[derive(Clone, Debug)]
pub struct NoiseStats {
    pub n_paths: usize,
    pub max_mean_dev: f64,
    pub max_cov_dev: f64,
    pub max_pseudo_dev: f64,
    pub rows: Vec<StatRow>,
}

fn dev(diff: f64, se: f64) -> f64 {
    if diff < 1e-14 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY
    }
}

/// Compare empirical mean, covariance and pseudo-covariance of the paths
/// against the target correlation of `bath`.
pub fn noise_statistics(paths: &[NoisePath], bath: &BathSpec) -> Result<NoiseStats> {
    if paths.len() < 2 {
        return Err(HopsError::InvalidInput("need at least two paths".into()));
    }
    let dt = paths[0].dt;
    let n = paths[0].len();
    for p in paths {
        if p.len() != n || (p.dt - dt).abs() > 1e-12 * dt.max(1e-300) {
            return Err(HopsError::Dimension("mismatched noise grids".into()));
        }
    }
    let n_pts = n.min(12);
    let mut idx: Vec<usize> = if n_pts == 1 {
        vec![0]
    } else {
        (0..n_pts).map(|i| i * (n - 1) / (n_pts - 1)).collect()
    };
    idx.dedup();
    let p = paths.len() as f64;

    let mut rows = Vec::new();
    let mut max_mean: f64 = 0.0;
    let mut max_cov: f64 = 0.0;
    let mut max_pseudo: f64 = 0.0;

    for &i in &idx {
        let t = i as f64 * dt;
        let vals: Vec<C64> = paths.iter().map(|pa| pa.samples[i]).collect();
        let mean: C64 = vals.iter().sum::<C64>() / p;
        let var = vals
            .iter()
            .map(|v| {
                let d = v - mean;
                d.re * d.re + d.im * d.im
            })
            .sum::<f64>()
            / (p - 1.0);
        let se = (var / p).sqrt();
        let d = dev(mean.norm(), se);
        max_mean = max_mean.max(d);
        rows.push(StatRow {
            kind: "mean",
            t,
            s: t,
            empirical: mean,
            target: C64::new(0.0, 0.0),
            std_error: se,
            deviation: d,
        });
    }

    // Paths store the conjugate process z*, so E[z*_t z_s] is estimated by
    // sample_t * conj(sample_s) and targets alpha(t-s)* ... equivalently we
    // estimate E[z_t z*_s] = conj(sample_t) * sample_s for t >= s.
    for (a, &i) in idx.iter().enumerate() {
        for &jx in idx.iter().take(a + 1) {
            let (t, s) = (i as f64 * dt, jx as f64 * dt);
            let target = bath.alpha(t - s);
            let prods: Vec<C64> = paths
                .iter()
                .map(|pa| pa.samples[i].conj() * pa.samples[jx])
                .collect();
            let mean: C64 = prods.iter().sum::<C64>() / p;
            let var = prods
                .iter()
                .map(|v| {
                    let d = v - mean;
                    d.re * d.re + d.im * d.im
                })
                .sum::<f64>()
                / (p - 1.0);
            let se = (var / p).sqrt();
            let d = dev((mean - target).norm(), se);
            max_cov = max_cov.max(d);
            rows.push(StatRow {
                kind: "covariance",
                t,
                s,
                empirical: mean,
                target,
                std_error: se,
                deviation: d,
            });

            let prods2: Vec<C64> = paths
                .iter()
                .map(|pa| pa.samples[i].conj() * pa.samples[jx].conj())
                .collect();
            let mean2: C64 = prods2.iter().sum::<C64>() / p;
            let var2 = prods2
                .iter()
                .map(|v| {
                    let d = v - mean2;
                    d.re * d.re + d.im * d.im
                })
                .sum::<f64>()
                / (p - 1.0);
            let se2 = (var2 / p).sqrt();
            let d2 = dev(mean2.norm(), se2);
            max_pseudo = max_pseudo.max(d2);
            rows.push(StatRow {
                kind: "pseudo",
                t,
                s,
                empirical: mean2,
                target: C64::new(0.0, 0.0),
                std_error: se2,
                deviation: d2,
            });
        }
    }

    Ok(NoiseStats {
        n_paths: paths.len(),
        max_mean_dev: max_mean,
        max_cov_dev: max_cov,
        max_pseudo_dev: max_pseudo,
        rows,
    })
}
