//! Exact small-scale reference solvers.
//!
//! Two independent routes validate the stochastic hierarchy: a dense
//! master-equation propagator for a system coupled to explicitly damped
//! harmonic modes (each mode realizes one exponential correlation term at
//! zero temperature), and the closed-form decoherence function of the
//! exactly solvable pure-dephasing model.

use crate::bath::BathSpec;
use crate::linalg::{C64, Op};
use crate::trajectory::SystemSpec;
use crate::{HopsError, Result};

/// Dense master-equation run sampled on an output grid.
#[derive(Clone, Debug)]
pub struct LindbladRun {
    pub times: Vec<f64>,
    pub states: Vec<Op>,
}

/// Fixed-step RK4 on d rho/dt = -i[H, rho] + sum_k (A rho A^+ - 1/2 {A^+A, rho}).
///
/// Trace and Hermiticity are structural properties of the generator; the
/// run aborts if the trace drifts by more than 1e-8 or values stop being
/// finite.
pub fn lindblad_solve(
    h: &Op,
    jump_ops: &[Op],
    rho0: &Op,
    dt: f64,
    t_max: f64,
    out_every: usize,
) -> Result<LindbladRun> {
    let d = h.dim();
    if rho0.dim() != d || jump_ops.iter().any(|a| a.dim() != d) {
        return Err(HopsError::Dimension("operator dimensions differ".into()));
    }
    if !(dt > 0.0) || t_max < dt {
        return Err(HopsError::InvalidInput("invalid time grid".into()));
    }
    let out_every = out_every.max(1);
    // precompute A^dag and A^dag A
    let adags: Vec<Op> = jump_ops.iter().map(|a| a.adjoint()).collect();
    let ada: Vec<Op> = jump_ops.iter().zip(&adags).map(|(a, ad)| ad.matmul(a)).collect();
    let minus_i = C64::new(0.0, -1.0);
    let half = C64::new(0.5, 0.0);
    let rhs = |rho: &Op| -> Op {
        let mut out = h.matmul(rho).sub(&rho.matmul(h)).scaled(minus_i);
        for (k, a) in jump_ops.iter().enumerate() {
            let ar = a.matmul(rho);
            out = out.add(&ar.matmul(&adags[k]));
            let anti = ada[k].matmul(rho).add(&rho.matmul(&ada[k])).scaled(half);
            out = out.sub(&anti);
        }
        out
    };

    let n_steps = (t_max / dt + 1e-9).floor() as usize;
    let trace0 = rho0.trace().re;
    let mut rho = rho0.clone();
    let mut out = LindbladRun { times: vec![0.0], states: vec![rho.clone()] };
    for step in 0..n_steps {
        let k1 = rhs(&rho);
        let y2 = rho.add(&k1.scaled(C64::new(0.5 * dt, 0.0)));
        let k2 = rhs(&y2);
        let y3 = rho.add(&k2.scaled(C64::new(0.5 * dt, 0.0)));
        let k3 = rhs(&y3);
        let y4 = rho.add(&k3.scaled(C64::new(dt, 0.0)));
        let k4 = rhs(&y4);
        let incr = k1
            .add(&k2.scaled(C64::new(2.0, 0.0)))
            .add(&k3.scaled(C64::new(2.0, 0.0)))
            .add(&k4)
            .scaled(C64::new(dt / 6.0, 0.0));
        rho = rho.add(&incr);
        if !rho.is_finite() {
            return Err(HopsError::NonFinite { step });
        }
        let drift = (rho.trace().re - trace0).abs();
        if drift > 1e-8 {
            return Err(HopsError::Trajectory(format!(
                "trace drift {drift:e} at step {step}; reduce dt"
            )));
        }
        if (step + 1) % out_every == 0 {
            out.times.push((step + 1) as f64 * dt);
            out.states.push(rho.clone());
        }
    }
    Ok(out)
}

/// Controls for the damped-mode construction.
#[derive(Clone, Debug)]
pub struct PseudoModeConfig {
    /// Starting Fock levels per mode.
    pub initial_cutoff: usize,
    /// Hard ceiling on the total tensor dimension.
    pub max_total_dim: usize,
    /// Convergence threshold on the reduced state between cutoff raises.
    pub tol: f64,
}

impl Default for PseudoModeConfig {
    fn default() -> Self {
        PseudoModeConfig { initial_cutoff: 8, max_total_dim: 4096, tol: 1e-6 }
    }
}

fn fock_annihilation(n: usize) -> Op {
    let mut b = Op::zeros(n);
    for k in 1..n {
        b.set(k - 1, k, C64::new((k as f64).sqrt(), 0.0));
    }
    b
}

fn embed(front: usize, op: &Op, back: usize) -> Op {
    Op::identity(front).kron(op).kron(&Op::identity(back))
}

/// Trace out everything but the leading `d`-dimensional factor.
fn partial_trace_system(rho: &Op, d: usize) -> Op {
    let total = rho.dim();
    let env = total / d;
    let mut out = Op::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for f in 0..env {
                acc += rho.at(i * env + f, j * env + f);
            }
            out.set(i, j, acc);
        }
    }
    out
}

fn run_fixed_cutoff(
    sys: &SystemSpec,
    cutoff: usize,
    rho0_sys: &Op,
    dt: f64,
    t_max: f64,
    out_every: usize,
) -> Result<Vec<Op>> {
    let d = sys.dim();
    // collect (env, g, w) triples; one damped mode per exponential term
    let mut modes = Vec::new();
    for (env, c) in sys.couplings.iter().enumerate() {
        for t in &c.bath.terms {
            if t.g.im.abs() > 1e-12 * t.g.re.abs().max(1e-300) || t.g.re <= 0.0 {
                return Err(HopsError::InvalidInput(format!(
                    "damped-mode reference needs real positive g, found {}",
                    t.g
                )));
            }
            if c.bath.temperature != 0.0 {
                return Err(HopsError::InvalidInput(
                    "damped-mode reference is a zero-temperature construction".into(),
                ));
            }
            modes.push((env, t.g.re, t.w));
        }
    }
    let n_modes = modes.len();
    let total = d * cutoff.pow(n_modes as u32);
    let b = fock_annihilation(cutoff);
    let bdag = b.adjoint();
    let number = bdag.matmul(&b);

    // H_total = H (x) 1 + sum_j Omega_j n_j + sqrt(g_j)(L_j b_j^+ + L_j^+ b_j)
    let mut h_total = sys.h.kron(&Op::identity(total / d));
    let mut jumps = Vec::with_capacity(n_modes);
    for (j, &(env, g, w)) in modes.iter().enumerate() {
        let front = cutoff.pow(j as u32);
        let back = cutoff.pow((n_modes - 1 - j) as u32);
        let nj = embed(front, &number, back);
        let bj = embed(front, &b, back);
        let bdagj = embed(front, &bdag, back);
        let omega = w.im;
        let gamma = w.re;
        h_total = h_total.add(&Op::identity(d).kron(&nj).scaled(C64::new(omega, 0.0)));
        let l = &sys.couplings[env].op;
        let coupling = l
            .kron(&bdagj)
            .add(&l.adjoint().kron(&bj))
            .scaled(C64::new(g.sqrt(), 0.0));
        h_total = h_total.add(&coupling);
        // zero-temperature damping at rate 2 gamma
        jumps.push(Op::identity(d).kron(&bj).scaled(C64::new((2.0 * gamma).sqrt(), 0.0)));
    }
    // vacuum projector on the mode factor
    let mut vac = Op::zeros(total / d);
    vac.set(0, 0, C64::new(1.0, 0.0));
    let rho0 = rho0_sys.kron(&vac);
    let run = lindblad_solve(&h_total, &jumps, &rho0, dt, t_max, out_every)?;
    Ok(run.states.iter().map(|s| partial_trace_system(s, d)).collect())
}

/// Exact reduced dynamics from explicitly damped modes, one per
/// exponential term (real g > 0, zero temperature). Fock cutoffs are
/// raised until the reduced state is converged to `cfg.tol`.
pub fn pseudomode_evolve(
    sys: &SystemSpec,
    cfg: &PseudoModeConfig,
    rho0_sys: &Op,
    dt: f64,
    t_max: f64,
    out_every: usize,
) -> Result<LindbladRun> {
    sys.validate()?;
    if rho0_sys.dim() != sys.dim() {
        return Err(HopsError::Dimension("initial state dimension mismatch".into()));
    }
    let n_modes: usize = sys.couplings.iter().map(|c| c.bath.terms.len()).sum();
    let mut cutoff = cfg.initial_cutoff.max(2);
    let mut prev: Option<Vec<Op>> = None;
    loop {
        let total = sys.dim() * cutoff.pow(n_modes as u32);
        if total > cfg.max_total_dim {
            return Err(HopsError::Budget {
                needed: total as u128,
                budget: cfg.max_total_dim,
            });
        }
        let states = run_fixed_cutoff(sys, cutoff, rho0_sys, dt, t_max, out_every)?;
        if let Some(p) = &prev {
            let change = states
                .iter()
                .zip(p)
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
            if change < cfg.tol {
                let n_steps = (t_max / dt + 1e-9).floor() as usize / out_every.max(1);
                let times = (0..=n_steps)
                    .map(|i| i as f64 * dt * out_every.max(1) as f64)
                    .collect();
                return Ok(LindbladRun { times, states });
            }
        }
        prev = Some(states);
        cutoff += 2;
    }
}

/// Closed-form normalized coherence of the pure-dephasing model
/// H = (eps/2) sigma_z, L = sigma_z:
///
/// rho_01(t) / rho_01(0) = e^{-i eps t} exp(-4 Phi(t)),
/// Phi(t) = sum_j g_j [ t / w_j + (e^{-w_j t} - 1) / w_j^2 ].
pub fn dephasing_coherence(eps: f64, bath: &BathSpec, t: f64) -> C64 {
    let mut phi = C64::new(0.0, 0.0);
    for term in &bath.terms {
        phi += term.g * (t / term.w + ((-term.w * t).exp() - 1.0) / (term.w * term.w));
    }
    (C64::new(0.0, -eps * t)).exp() * (-4.0 * phi).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExpTerm;
    use crate::models;
    use crate::trajectory::Coupling;
    use approx::assert_relative_eq;

    fn real_bath(g: f64, w: C64) -> BathSpec {
        BathSpec::new(vec![ExpTerm::new(C64::new(g, 0.0), w).unwrap()], 0.0).unwrap()
    }

    #[test]
    fn unitary_limit_without_jumps() {
        let h = models::sigma_x().scaled(C64::new(0.5, 0.0));
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let run = lindblad_solve(&h, &[], &rho0, 1e-3, 3.0, 100).unwrap();
        for (i, &t) in run.times.iter().enumerate() {
            // populations oscillate as cos^2(t/2) under H = sigma_x/2
            let p0 = run.states[i].at(0, 0).re;
            assert!((p0 - (0.5 * t).cos().powi(2)).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn decay_rate_of_a_two_level_emitter() {
        // L = sqrt(Gamma) sigma_-, population decays as e^{-Gamma t}
        let gamma: f64 = 0.7;
        let mut lower = Op::zeros(2);
        lower.set(1, 0, C64::new(gamma.sqrt(), 0.0)); // |1><0|, excited = index 0
        let h = Op::zeros(2);
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let run = lindblad_solve(&h, &[lower], &rho0, 1e-3, 4.0, 200).unwrap();
        for (i, &t) in run.times.iter().enumerate() {
            let p = run.states[i].at(0, 0).re;
            assert!((p - (-gamma * t).exp()).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let h = models::sigma_z();
        let mut a = Op::zeros(2);
        a.set(1, 0, C64::new(0.6, 0.0));
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(0.7, 0.0));
        rho0.set(1, 1, C64::new(0.3, 0.0));
        rho0.set(0, 1, C64::new(0.2, 0.1));
        rho0.set(1, 0, C64::new(0.2, -0.1));
        let run = lindblad_solve(&h, &[a], &rho0, 5e-4, 2.0, 50).unwrap();
        for s in &run.states {
            assert!((s.trace().re - 1.0).abs() < 1e-8);
            assert!(s.is_hermitian(1e-10));
        }
    }

    #[test]
    fn weak_coupling_limit_is_unitary() {
        // g -> 0: reduced dynamics is the bare unitary evolution
        let sys = models::spin_boson(1.0, 0.3, real_bath(1e-8, C64::new(0.5, 1.0)));
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let cfg = PseudoModeConfig { initial_cutoff: 2, max_total_dim: 64, tol: 1e-6 };
        let run = pseudomode_evolve(&sys, &cfg, &rho0, 1e-3, 2.0, 100).unwrap();
        // closed-form two-level evolution under H = -(1/2) sigma_x + 0.15 sigma_z
        let (vals, vecs) = sys.h.hermitian_eigen();
        for (i, &t) in run.times.iter().enumerate() {
            // rebuild e^{-iHt} rho0 e^{iHt} from the eigendecomposition
            let mut expect = Op::zeros(2);
            for a in 0..2 {
                for b in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..2 {
                        for l in 0..2 {
                            let phase =
                                (C64::new(0.0, -(vals[k] - vals[l]) * t)).exp();
                            // <a|k><k|rho0|l><l|b>
                            let mut inner = C64::new(0.0, 0.0);
                            for p in 0..2 {
                                for q in 0..2 {
                                    inner += vecs.at(p, k).conj()
                                        * rho0.at(p, q)
                                        * vecs.at(q, l);
                                }
                            }
                            acc += vecs.at(a, k) * phase * inner * vecs.at(b, l).conj();
                        }
                    }
                    expect.set(a, b, acc);
                }
            }
            let diff = run.states[i].max_abs_diff(&expect);
            assert!(diff < 1e-6, "t = {t}: {diff}");
        }
    }

    #[test]
    fn budget_ceiling_reported() {
        // total tensor dimension above the ceiling must fail before allocation
        let sys = SystemSpec::new(
            Op::zeros(1),
            vec![Coupling { op: Op::identity(1), bath: real_bath(0.8, C64::new(0.6, 1.1)) }],
        )
        .unwrap();
        let cfg = PseudoModeConfig { initial_cutoff: 8, max_total_dim: 4, tol: 1e-6 };
        let mut rho0 = Op::zeros(1);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        assert!(matches!(
            pseudomode_evolve(&sys, &cfg, &rho0, 1e-3, 1.0, 10),
            Err(HopsError::Budget { .. })
        ));
    }

    #[test]
    fn dephasing_formula_closed_form_term() {
        // alpha = g e^{-w t}: Phi(t) = g [t/w + (e^{-wt} - 1)/w^2], checked
        // against midpoint quadrature of the double integral
        let g = C64::new(0.9, 0.2);
        let w = C64::new(0.8, -0.5);
        let bath = BathSpec::new(vec![ExpTerm::new(g, w).unwrap()], 0.0).unwrap();
        let t = 1.7;
        let n = 4000;
        let h = t / n as f64;
        let mut phi = C64::new(0.0, 0.0);
        for i in 0..n {
            let s = (i as f64 + 0.5) * h;
            // inner integral of alpha over [0, s]
            let inner = g * (1.0 - (-w * s).exp()) / w;
            phi += inner * h;
        }
        let closed = g * (t / w + ((-w * t).exp() - 1.0) / (w * w));
        assert!((phi - closed).norm() < 1e-6);
        // and the coherence assembles e^{-i eps t} e^{-4 Phi}
        let eps = 0.6;
        let val = dephasing_coherence(eps, &bath, t);
        let expect = (C64::new(0.0, -eps * t)).exp() * (-4.0 * closed).exp();
        assert!((val - expect).norm() < 1e-9);
    }

    #[test]
    fn dephasing_coherence_starts_at_one() {
        let bath = real_bath(1.0, C64::new(1.0, 0.0));
        let v = dephasing_coherence(0.8, &bath, 0.0);
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-14);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn dephasing_cross_validated_against_damped_modes() {
        // mandatory cross-check before the analytic oracle is trusted:
        // H = (eps/2) sigma_z, L = sigma_z, real g
        let eps = 0.9;
        let bath = real_bath(1.0, C64::new(1.0, 0.0));
        let sys = SystemSpec::new(
            models::sigma_z().scaled(C64::new(0.5 * eps, 0.0)),
            vec![Coupling { op: models::sigma_z(), bath: bath.clone() }],
        )
        .unwrap();
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(0.5, 0.0));
        rho0.set(0, 1, C64::new(0.5, 0.0));
        rho0.set(1, 0, C64::new(0.5, 0.0));
        rho0.set(1, 1, C64::new(0.5, 0.0));
        let cfg = PseudoModeConfig { initial_cutoff: 10, max_total_dim: 128, tol: 1e-7 };
        let run = pseudomode_evolve(&sys, &cfg, &rho0, 5e-4, 2.0, 400).unwrap();
        for (i, &t) in run.times.iter().enumerate() {
            let got = run.states[i].at(0, 1) / rho0.at(0, 1);
            let expect = dephasing_coherence(eps, &bath, t);
            assert!(
                (got - expect).norm() < 1e-4,
                "t = {t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn fock_convergence_is_monotone_toward_limit() {
        // raising the cutoff changes the reduced state by less and less
        let sys = models::spin_boson(1.0, 0.0, real_bath(2.0, C64::new(0.5, 2.0)));
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let mut prev: Option<Vec<Op>> = None;
        let mut changes = Vec::new();
        for cutoff in [6usize, 10, 14, 18] {
            let states = run_fixed_cutoff(&sys, cutoff, &rho0, 2e-3, 2.0, 100).unwrap();
            if let Some(p) = &prev {
                let change = states
                    .iter()
                    .zip(p)
                    .map(|(a, b)| a.max_abs_diff(b))
                    .fold(0.0, f64::max);
                changes.push(change);
            }
            prev = Some(states);
        }
        assert!(changes.windows(2).all(|w| w[1] <= w[0] * 1.05), "{changes:?}");
        assert!(changes.last().unwrap() < &1e-4);
    }
}
