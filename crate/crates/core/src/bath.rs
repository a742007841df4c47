//! Bath correlation functions and their multi-exponential expansions.
//!
//! A structured environment enters the solver only through its two-time
//! correlation function alpha(tau). Parametric spectral densities
//! (antisymmetrized Lorentzian sums and the Drude-Lorentz form) are
//! expanded into sums of complex exponentials by closing the frequency
//! integral in the lower half-plane; finite temperature is handled by a
//! Pade representation of coth whose poles contribute additional real
//! decay terms. Every expansion is validated against direct quadrature
//! of the defining integral and the achieved error is reported.

use crate::linalg::C64;
use crate::quad;
use crate::{HopsError, Result};

/// One exponential term g * exp(-w tau) of a correlation expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    /// Complex amplitude (units of energy squared).
    pub g: C64,
    /// Complex rate w = gamma + i Omega with gamma > 0.
    pub w: C64,
}

impl ExpTerm {
    pub fn new(g: C64, w: C64) -> Result<Self> {
        if !(w.re > 0.0) {
            return Err(HopsError::InvalidInput(format!(
                "exponential term must decay: Re(w) = {} is not positive",
                w.re
            )));
        }
        Ok(ExpTerm { g, w })
    }
}

/// A bath described by its exponential correlation expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    pub terms: Vec<ExpTerm>,
    /// Temperature the expansion was produced for (already folded into terms).
    pub temperature: f64,
}

impl BathSpec {
    pub fn new(terms: Vec<ExpTerm>, temperature: f64) -> Result<Self> {
        if temperature < 0.0 {
            return Err(HopsError::InvalidInput("negative temperature".into()));
        }
        let a0: C64 = terms.iter().map(|t| t.g).sum();
        let scale = terms.iter().map(|t| t.g.norm()).sum::<f64>().max(1e-300);
        if a0.re < -1e-10 * scale {
            return Err(HopsError::InvalidInput(format!(
                "alpha(0) = {} has negative real part",
                a0
            )));
        }
        Ok(BathSpec { terms, temperature })
    }

    /// Correlation function alpha(tau) for tau >= 0.
    pub fn alpha(&self, tau: f64) -> C64 {
        self.terms.iter().map(|t| t.g * (-t.w * tau).exp()).sum()
    }

    pub fn alpha0(&self) -> C64 {
        self.terms.iter().map(|t| t.g).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A Lorentzian peak of weight p centered at Omega with half-width gamma,
/// antisymmetrized in frequency so that J(omega) vanishes linearly at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzPeak {
    pub weight: f64,
    pub center: f64,
    pub width: f64,
}

/// Parametric spectral density variants.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensity {
    LorentzianSum { peaks: Vec<LorentzPeak> },
    DrudeLorentz { lambda: f64, gamma_c: f64 },
    /// Bypasses the spectral integral; the terms define alpha directly.
    DirectExpansion { terms: Vec<ExpTerm> },
}

impl SpectralDensity {
    /// J(omega) on the real axis (antisymmetric continuation).
    pub fn j(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::LorentzianSum { peaks } => peaks
                .iter()
                .map(|p| {
                    let lp = p.width / ((omega - p.center).powi(2) + p.width * p.width);
                    let lm = p.width / ((omega + p.center).powi(2) + p.width * p.width);
                    p.weight / std::f64::consts::PI * (lp - lm)
                })
                .sum(),
            SpectralDensity::DrudeLorentz { lambda, gamma_c } => {
                2.0 * lambda * gamma_c / std::f64::consts::PI * omega
                    / (omega * omega + gamma_c * gamma_c)
            }
            SpectralDensity::DirectExpansion { .. } => 0.0,
        }
    }

    /// J(omega)/omega, finite at omega = 0.
    fn j_over_omega(&self, omega: f64) -> f64 {
        let eps = 1e-9 * self.frequency_scale().max(1e-30);
        match self {
            SpectralDensity::LorentzianSum { peaks } => {
                if omega.abs() > eps {
                    self.j(omega) / omega
                } else {
                    peaks
                        .iter()
                        .map(|p| {
                            let d = p.center * p.center + p.width * p.width;
                            4.0 * p.weight * p.width * p.center / (std::f64::consts::PI * d * d)
                        })
                        .sum()
                }
            }
            SpectralDensity::DrudeLorentz { lambda, gamma_c } => {
                2.0 * lambda * gamma_c
                    / std::f64::consts::PI
                    / (omega * omega + gamma_c * gamma_c)
            }
            SpectralDensity::DirectExpansion { .. } => 0.0,
        }
    }

    /// Analytic continuation of J to complex frequency.
    fn j_analytic(&self, z: C64) -> C64 {
        match self {
            SpectralDensity::LorentzianSum { peaks } => peaks
                .iter()
                .map(|p| {
                    let lp = p.width / ((z - p.center) * (z - p.center) + p.width * p.width);
                    let lm = p.width / ((z + p.center) * (z + p.center) + p.width * p.width);
                    p.weight / std::f64::consts::PI * (lp - lm)
                })
                .sum(),
            SpectralDensity::DrudeLorentz { lambda, gamma_c } => {
                2.0 * lambda * gamma_c / std::f64::consts::PI * z
                    / (z * z + gamma_c * gamma_c)
            }
            SpectralDensity::DirectExpansion { .. } => C64::new(0.0, 0.0),
        }
    }

    /// Simple poles of the continuation in the lower half-plane with residues.
    fn poles_lower_half(&self) -> Vec<(C64, C64)> {
        match self {
            SpectralDensity::LorentzianSum { peaks } => {
                let mut out = Vec::new();
                for p in peaks {
                    let r = C64::new(0.0, p.weight / (2.0 * std::f64::consts::PI));
                    out.push((C64::new(p.center, -p.width), r));
                    out.push((C64::new(-p.center, -p.width), -r));
                }
                out
            }
            SpectralDensity::DrudeLorentz { lambda, gamma_c } => {
                vec![(
                    C64::new(0.0, -gamma_c),
                    C64::new(lambda * gamma_c / std::f64::consts::PI, 0.0),
                )]
            }
            SpectralDensity::DirectExpansion { .. } => Vec::new(),
        }
    }

    /// Extent of resonant structure, used to size quadrature panels.
    fn frequency_scale(&self) -> f64 {
        match self {
            SpectralDensity::LorentzianSum { peaks } => peaks
                .iter()
                .map(|p| p.center.abs() + p.width)
                .fold(0.0, f64::max),
            SpectralDensity::DrudeLorentz { gamma_c, .. } => *gamma_c,
            SpectralDensity::DirectExpansion { terms } => terms
                .iter()
                .map(|t| t.w.im.abs() + t.w.re)
                .fold(0.0, f64::max),
        }
    }

    /// Check J >= 0 for omega >= 0 on a sampled grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::DirectExpansion { terms } => {
                for t in terms {
                    ExpTerm::new(t.g, t.w)?;
                }
                Ok(())
            }
            _ => {
                let scale = self.frequency_scale();
                let mut jmax: f64 = 0.0;
                let samples: Vec<f64> =
                    (0..512).map(|i| 4.0 * scale * (i as f64 + 0.5) / 512.0).collect();
                for &w in &samples {
                    jmax = jmax.max(self.j(w).abs());
                }
                for &w in &samples {
                    if self.j(w) < -1e-10 * jmax {
                        return Err(HopsError::InvalidInput(format!(
                            "spectral density negative at omega = {w}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// x coth(x/(2T)), smooth at x = 0.
fn x_coth_x_over_2t(x: f64, t: f64) -> f64 {
    let y = x / (2.0 * t);
    if y.abs() < 1e-2 {
        2.0 * t * (1.0 + y * y / 3.0 - y.powi(4) / 45.0)
    } else if y.abs() > 350.0 {
        x.abs()
    } else {
        x / y.tanh()
    }
}

/// coth of a complex argument, stable for large |Re z|.
fn coth_complex(z: C64) -> C64 {
    if z.re > 20.0 {
        C64::new(1.0, 0.0) + 2.0 * (-2.0 * z).exp()
    } else if z.re < -20.0 {
        C64::new(-1.0, 0.0) - 2.0 * (2.0 * z).exp()
    } else {
        1.0 / z.tanh()
    }
}

/// Evaluate alpha(tau) by adaptive quadrature of the spectral integral.
///
/// Only tau >= 0 is evaluated; alpha(-tau) follows from hermiticity.
pub fn correlation_function(j: &SpectralDensity, temperature: f64, tau: f64) -> Result<C64> {
    correlation_function_tol(j, temperature, tau, 1e-9)
}

pub fn correlation_function_tol(
    j: &SpectralDensity,
    temperature: f64,
    tau: f64,
    rel_tol: f64,
) -> Result<C64> {
    if temperature < 0.0 {
        return Err(HopsError::InvalidInput("negative temperature".into()));
    }
    if tau < 0.0 {
        return Err(HopsError::InvalidInput(
            "tau must be nonnegative; use hermiticity for tau < 0".into(),
        ));
    }
    if let SpectralDensity::DirectExpansion { terms } = j {
        let bath = BathSpec::new(terms.clone(), temperature)?;
        return Ok(bath.alpha(tau));
    }
    j.validate()?;
    let t = temperature;
    let integrand = move |w: f64| -> C64 {
        let thermal = if t > 0.0 {
            j.j_over_omega(w) * x_coth_x_over_2t(w, t)
        } else {
            j.j(w)
        };
        C64::new(thermal * (w * tau).cos(), -j.j(w) * (w * tau).sin())
    };
    let extent = 4.0 * j.frequency_scale() + 8.0 * t;
    let period = if tau > 1e-300 {
        Some(2.0 * std::f64::consts::PI / tau)
    } else {
        None
    };
    let r = quad::half_line(&integrand, extent, period, rel_tol)?;
    Ok(r.value)
}

/// Pade representation coth(x/2) ~ 2/x + sum_k 4 eta_k x / (x^2 + xi_k^2).
#[derive(Clone, Debug, PartialEq)]
pub struct PadeScheme {
    pub poles: Vec<f64>,
    pub residues: Vec<f64>,
}

impl PadeScheme {
    /// Scheme with no poles (N = 0).
    pub fn empty() -> Self {
        PadeScheme { poles: Vec::new(), residues: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Evaluate the approximation of coth(x/2).
    pub fn coth_half(&self, x: f64) -> f64 {
        let mut v = 2.0 / x;
        for (xi, eta) in self.poles.iter().zip(&self.residues) {
            v += 4.0 * eta * x / (x * x + xi * xi);
        }
        v
    }
}

fn symmetric_tridiag_eigenvalues(off_diag: &[f64]) -> Vec<f64> {
    let n = off_diag.len() + 1;
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            off_diag[i.min(j)]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Construct the [N-1/N] scheme from the eigenvalues of the standard
/// symmetric tridiagonal matrices.
pub fn pade_coth_terms(n: usize) -> Result<PadeScheme> {
    if n == 0 {
        return Ok(PadeScheme { poles: Vec::new(), residues: Vec::new() });
    }
    if n > 120 {
        return Err(HopsError::InvalidInput(format!(
            "pade order {n} too large for stable pole computation"
        )));
    }
    // 2N x 2N matrix with off-diagonal 1/sqrt((2m+1)(2m+3)), m = 1..2N-1
    let b: Vec<f64> = (1..2 * n)
        .map(|m| 1.0 / (((2 * m + 1) * (2 * m + 3)) as f64).sqrt())
        .collect();
    let ev = symmetric_tridiag_eigenvalues(&b);
    let mut poles: Vec<f64> = ev.iter().filter(|&&x| x > 1e-13).map(|&x| 2.0 / x).collect();
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if poles.len() != n {
        return Err(HopsError::InvalidInput(format!(
            "pade order {n}: unstable pole computation ({} positive eigenvalues)",
            poles.len()
        )));
    }
    // (2N-1) x (2N-1) matrix with off-diagonal 1/sqrt((2m+3)(2m+5))
    let zeta: Vec<f64> = if n > 1 {
        let b2: Vec<f64> = (1..2 * n - 1)
            .map(|m| 1.0 / (((2 * m + 3) * (2 * m + 5)) as f64).sqrt())
            .collect();
        let ev2 = symmetric_tridiag_eigenvalues(&b2);
        let mut z: Vec<f64> =
            ev2.iter().filter(|&&x| x > 1e-13).map(|&x| 2.0 / x).collect();
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if z.len() != n - 1 {
            return Err(HopsError::InvalidInput(format!(
                "pade order {n}: unstable residue computation"
            )));
        }
        z
    } else {
        Vec::new()
    };
    let prefactor = 0.5 * (n as f64) * (2.0 * n as f64 + 3.0);
    let mut residues = Vec::with_capacity(n);
    for j in 0..n {
        let xj2 = poles[j] * poles[j];
        let mut r = prefactor;
        // pair numerator and denominator factors to keep the running product bounded
        let den_idx = (0..n).filter(|&k| k != j);
        for (&z, k) in zeta.iter().zip(den_idx) {
            r *= (z * z - xj2) / (poles[k] * poles[k] - xj2);
        }
        residues.push(r);
    }
    if residues.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(HopsError::InvalidInput(format!(
            "pade order {n}: nonpositive residue, computation unstable"
        )));
    }
    Ok(PadeScheme { poles, residues })
}

/// Controls for expansion validation.
#[derive(Clone, Debug)]
pub struct ExpansionOptions {
    /// Largest lag of the validation grid.
    pub tau_max: f64,
    /// Number of grid points on (0, tau_max].
    pub n_grid: usize,
    /// Maximum tolerated relative deviation from quadrature.
    pub tolerance: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { tau_max: 0.0, n_grid: 48, tolerance: 1e-3 }
    }
}

/// Expansion result: the bath plus the achieved validation error.
#[derive(Clone, Debug)]
pub struct ExpandedBath {
    pub bath: BathSpec,
    /// max_tau |alpha_sum - alpha_quad| / |alpha_sum(0)| over the grid.
    pub max_rel_error: f64,
}

/// Expand alpha(tau) as a sum of complex exponentials by residue collection
/// at the spectral density's lower-half-plane poles plus, for T > 0, the
/// Pade poles of the thermal factor. The result is always validated against
/// direct quadrature on a tau grid.
pub fn expand_correlation(
    j: &SpectralDensity,
    temperature: f64,
    scheme: &PadeScheme,
    opts: &ExpansionOptions,
) -> Result<ExpandedBath> {
    if temperature < 0.0 {
        return Err(HopsError::InvalidInput("negative temperature".into()));
    }
    if let SpectralDensity::DirectExpansion { terms } = j {
        let bath = BathSpec::new(terms.clone(), temperature)?;
        return Ok(ExpandedBath { bath, max_rel_error: 0.0 });
    }
    j.validate()?;
    let freq_scale = j.frequency_scale().max(1e-300);
    let mut terms: Vec<ExpTerm> = Vec::new();
    for (pole, residue) in j.poles_lower_half() {
        if pole.im.abs() < 1e-12 * freq_scale {
            return Err(HopsError::InvalidInput(format!(
                "spectral density pole {pole} lies on the real axis"
            )));
        }
        let w = C64::new(0.0, 1.0) * pole; // e^{-i pole tau} = e^{-w tau}
        if temperature > 0.0 {
            let thermal = coth_complex(pole / (2.0 * temperature)) + 1.0;
            let g = C64::new(0.0, -std::f64::consts::PI) * residue * thermal;
            if g.norm() > 0.0 {
                terms.push(ExpTerm::new(g, w)?);
            }
        } else {
            // zero temperature: coth -> sign of the real part
            if pole.re > 1e-12 * freq_scale {
                let g = C64::new(0.0, -2.0 * std::f64::consts::PI) * residue;
                terms.push(ExpTerm::new(g, w)?);
            } else if pole.re.abs() <= 1e-12 * freq_scale {
                return Err(HopsError::InvalidInput(
                    "purely damped spectral-density pole cannot be expanded at T = 0"
                        .into(),
                ));
            }
        }
    }
    if temperature > 0.0 {
        for (xi, eta) in scheme.poles.iter().zip(&scheme.residues) {
            let nu = xi * temperature;
            for (pole, _) in j.poles_lower_half() {
                if (pole - C64::new(0.0, -nu)).norm() < 1e-9 * nu {
                    return Err(HopsError::InvalidInput(format!(
                        "pade pole at {nu} collides with a spectral-density pole"
                    )));
                }
            }
            let g = C64::new(0.0, -2.0 * std::f64::consts::PI)
                * eta
                * temperature
                * j.j_analytic(C64::new(0.0, -nu));
            terms.push(ExpTerm::new(g, C64::new(nu, 0.0))?);
        }
    }
    let bath = BathSpec::new(terms, temperature)?;
    if bath.is_empty() {
        return Ok(ExpandedBath { bath, max_rel_error: 0.0 });
    }

    // Mandatory self-validation against the quadrature route.
    let tau_max = if opts.tau_max > 0.0 {
        opts.tau_max
    } else {
        10.0 / bath.terms.iter().map(|t| t.w.re).fold(f64::INFINITY, f64::min)
    };
    let scale = bath.alpha0().norm().max(1e-300);
    let quad_tol = (opts.tolerance * 1e-2).clamp(1e-12, 1e-7);
    let mut max_err: f64 = 0.0;
    for i in 0..opts.n_grid {
        let tau = tau_max * (i as f64 + 1.0) / opts.n_grid as f64;
        let aq = correlation_function_tol(j, temperature, tau, quad_tol)?;
        let asum = bath.alpha(tau);
        max_err = max_err.max((asum - aq).norm() / scale);
    }
    if max_err > opts.tolerance {
        return Err(HopsError::Validation { achieved: max_err, tolerance: opts.tolerance });
    }
    Ok(ExpandedBath { bath, max_rel_error: max_err })
}

/// Reorganization energy int_0^inf J(omega)/omega d omega.
pub fn reorganization_energy(j: &SpectralDensity) -> Result<f64> {
    match j {
        SpectralDensity::DirectExpansion { .. } => Err(HopsError::InvalidInput(
            "reorganization energy requires a parametric spectral density".into(),
        )),
        _ => {
            j.validate()?;
            let f = move |w: f64| C64::new(j.j_over_omega(w), 0.0);
            let r = quad::half_line(&f, 4.0 * j.frequency_scale(), None, 1e-10)?;
            Ok(r.value.re)
        }
    }
}
