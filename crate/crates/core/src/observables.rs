//! Readout: expectation values, the deterministic dipole correlation
//! function, and absorption spectra from its half-sided Fourier transform.

use rustfft::FftPlanner;

use crate::ensemble::DensityTrajectory;
use crate::hierarchy::HierarchySpace;
use crate::linalg::{inner, C64, Op};
use crate::noise::NoisePath;
use crate::trajectory::{
    integrate_trajectory, IntegrationOptions, SystemSpec, Terminator, Variant,
};
use crate::{HopsError, Result};

/// Time series of Tr(op rho(t)) with a propagated error band.
#[derive(Clone, Debug)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    pub stderr: Vec<f64>,
    /// False when the operator was not Hermitian (values stay complex).
    pub hermitian: bool,
}

impl ObservableSeries {
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// Tr(op rho(t)); entry-wise standard errors are combined in quadrature.
pub fn expectation(op: &Op, rho: &DensityTrajectory) -> Result<ObservableSeries> {
    let d = rho.dim;
    if op.dim() != d {
        return Err(HopsError::Dimension(format!(
            "operator dim {} vs density dim {d}",
            op.dim()
        )));
    }
    let hermitian = op.is_hermitian(1e-12);
    let mut values = Vec::with_capacity(rho.times.len());
    let mut stderr = Vec::with_capacity(rho.times.len());
    for step in 0..rho.times.len() {
        let r = rho.rho_at(step);
        let mut v = C64::new(0.0, 0.0);
        let mut var = 0.0;
        for i in 0..d {
            for j in 0..d {
                let o = op.at(i, j);
                v += o * r[j * d + i];
                let se = rho.stderr[step * d * d + j * d + i];
                var += (o.norm() * se).powi(2);
            }
        }
        values.push(v);
        stderr.push(var.sqrt());
    }
    Ok(ObservableSeries { times: rho.times.clone(), values, stderr, hermitian })
}

/// Deterministic dipole correlation samples M(t).
#[derive(Clone, Debug)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub m: Vec<C64>,
    pub mu_tot_sq: f64,
}

/// Correlation function of the collective dipole-created state, computed
/// from the single linear trajectory with the noise frozen to zero.
///
/// M(t) = mu_tot^2 <psi_0 | psi_t>, psi_0 = sum_n mu_n |n> normalized.
/// Finite-temperature baths are admissible because every coupling operator
/// is required to be self-adjoint in that case (thermal statistics are
/// already folded into the expansion).
pub fn dipole_autocorrelation(
    sys: &SystemSpec,
    space: &HierarchySpace,
    dipoles: &[f64],
    dt: f64,
    t_max: f64,
    terminator: Terminator,
) -> Result<CorrelationSeries> {
    let d = sys.dim();
    if dipoles.len() != d {
        return Err(HopsError::Dimension(format!(
            "{} dipoles for a {d}-site system",
            dipoles.len()
        )));
    }
    let mu_tot_sq: f64 = dipoles.iter().map(|m| m * m).sum();
    if mu_tot_sq <= 0.0 {
        return Err(HopsError::InvalidInput("all dipoles vanish".into()));
    }
    let norm = mu_tot_sq.sqrt();
    let psi0: Vec<C64> = dipoles.iter().map(|&m| C64::new(m / norm, 0.0)).collect();

    let n_steps = (t_max / dt + 1e-9).floor() as usize;
    let zero_paths: Vec<NoisePath> = (0..sys.couplings.len())
        .map(|_| NoisePath::zeros(dt / 2.0, 2 * n_steps + 1))
        .collect();
    let opts = IntegrationOptions {
        dt,
        t_max,
        variant: Variant::Linear,
        terminator,
        rescale_floor: 0.0,
        rescale_ceil: f64::INFINITY,
        record_diagnostics: false,
    };
    let traj = integrate_trajectory(sys, space, &zero_paths, &psi0, &opts)?;
    let m = (0..traj.times.len())
        .map(|step| mu_tot_sq * inner(&psi0, traj.psi0_at(step)))
        .collect();
    Ok(CorrelationSeries { times: traj.times.clone(), m, mu_tot_sq })
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    /// Exponential damping rate applied to M(t); reported as added
    /// Lorentzian broadening.
    pub damping: f64,
    /// Zero-padding factor for the transform grid (>= 4 enforced).
    pub padding_factor: usize,
    /// Warn when |M(t_max)| exceeds this fraction of |M(0)| undamped.
    pub decay_warn_fraction: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { damping: 0.0, padding_factor: 4, decay_warn_fraction: 0.01 }
    }
}

/// Absorption strength A(nu) on a frequency grid, plus retained M samples.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub nu: Vec<f64>,
    pub a: Vec<f64>,
    pub m: Vec<C64>,
    pub damping: f64,
    /// Set when M had not decayed at t_max and no damping was requested.
    pub tail_warning: bool,
}

impl SpectrumResult {
    /// Index of the maximum of A.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.a.iter().enumerate() {
            if v > self.a[best] {
                best = i;
            }
        }
        best
    }

    pub fn grid_step(&self) -> f64 {
        self.nu[1] - self.nu[0]
    }

    /// Trapezoid integral of A over the full grid.
    pub fn integral(&self) -> f64 {
        let dv = self.grid_step();
        let mut acc = 0.0;
        for w in self.a.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dv;
        }
        acc
    }
}

/// Half-sided Fourier transform A(nu) = Re int_0^inf e^{i nu t} M(t) dt,
/// evaluated on a zero-padded grid.
pub fn absorption_spectrum(m: &CorrelationSeries, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let n = m.m.len();
    if n < 2 {
        return Err(HopsError::InvalidInput("need at least two samples".into()));
    }
    let dt = m.times[1] - m.times[0];
    for w in m.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(HopsError::InvalidInput("nonuniform time grid".into()));
        }
    }
    let m0 = m.m[0].norm();
    let tail = m.m[n - 1].norm();
    let tail_warning = opts.damping == 0.0 && tail > opts.decay_warn_fraction * m0;

    let pad = opts.padding_factor.max(4);
    let n_fft = (n * pad).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n_fft];
    for (i, &v) in m.m.iter().enumerate() {
        // trapezoid end weights keep the grid sum rule exact
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let damped = v * (-opts.damping * m.times[i]).exp();
        buf[i] = damped * weight * dt;
    }
    // inverse transform implements the e^{+i nu t} kernel
    FftPlanner::new().plan_fft_inverse(n_fft).process(&mut buf);

    let d_nu = 2.0 * std::f64::consts::PI / (n_fft as f64 * dt);
    let mut pairs: Vec<(f64, f64)> = (0..n_fft)
        .map(|k| {
            let nu = if k <= n_fft / 2 {
                k as f64 * d_nu
            } else {
                (k as f64 - n_fft as f64) * d_nu
            };
            (nu, buf[k].re)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(SpectrumResult {
        nu: pairs.iter().map(|p| p.0).collect(),
        a: pairs.iter().map(|p| p.1).collect(),
        m: m.m.clone(),
        damping: opts.damping,
        tail_warning,
    })
}
