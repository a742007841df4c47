//! Hierarchy assembly and single-trajectory integration.
//!
//! For every auxiliary index k the right-hand side is
//!
//! ```text
//! d psi(k)/dt = (-iH - k.w) psi(k) + sum_n zeta_n L_n psi(k)
//!             + sum_j k_j g_j L_n(j) psi(k - e_j)
//!             - sum_j B_n(j)       psi(k + e_j)
//! ```
//!
//! with zeta_n the conjugate noise of environment n and B_n = L_n^dag for
//! the linear variant. The normalized variant shifts the noise by memory
//! accumulators u_j (du_j/dt = -conj(w_j) u_j + conj(g_j) <L_n^dag>) and
//! uses B_n = L_n^dag - <L_n^dag>. The layer |k| = K is closed either by
//! the rescaled closure, which re-expresses the missing k + e_j state
//! through retained ones, or by zero.
//!
//! Time stepping is classical fixed-step RK4; the synthesized noise is
//! smooth and supplied exactly at half-step midpoints, so trajectories are
//! reproducible ordinary-ODE solutions.

use crate::bath::BathSpec;
use crate::hierarchy::HierarchySpace;
use crate::linalg::{axpy, norm, scale, C64, Op};
use crate::noise::NoisePath;
use crate::{HopsError, Result};

/// One independent environment: coupling operator plus bath expansion.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub op: Op,
    pub bath: BathSpec,
}

/// System Hamiltonian and its environments.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub h: Op,
    pub couplings: Vec<Coupling>,
}

impl SystemSpec {
    pub fn new(h: Op, couplings: Vec<Coupling>) -> Result<Self> {
        let sys = SystemSpec { h, couplings };
        sys.validate()?;
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Total number of exponential modes over all environments.
    pub fn n_modes(&self) -> usize {
        self.couplings.iter().map(|c| c.bath.terms.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.h.is_hermitian(1e-12) {
            return Err(HopsError::InvalidInput("Hamiltonian is not Hermitian".into()));
        }
        for (n, c) in self.couplings.iter().enumerate() {
            if c.op.dim() != self.h.dim() {
                return Err(HopsError::Dimension(format!(
                    "coupling operator {n} has dim {} but H has dim {}",
                    c.op.dim(),
                    self.h.dim()
                )));
            }
            if c.bath.terms.is_empty() {
                return Err(HopsError::InvalidInput(format!(
                    "environment {n} has an empty bath expansion"
                )));
            }
            if c.bath.temperature > 0.0 && !c.op.is_hermitian(1e-12) {
                return Err(HopsError::InvalidInput(format!(
                    "environment {n}: finite-temperature expansion requires L = L^dag"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Linear,
    Nonlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminator {
    /// Rescaled closure of the first truncated layer.
    Rescaled,
    /// Plain zero closure.
    Zero,
}

/// Full solver state at one instant.
#[derive(Clone, Debug)]
pub struct HopsState {
    pub t: f64,
    /// Auxiliary states, index-major: psi[idx * dim .. (idx+1) * dim].
    pub psi: Vec<C64>,
    /// Memory accumulators u_j (nonlinear variant only; zero otherwise).
    pub shift: Vec<C64>,
    /// Accumulated logarithm of removed scale factors.
    pub log_scale: f64,
}

impl HopsState {
    /// psi(0) = psi0 on the vacuum index, every other auxiliary state zero.
    pub fn initial(space: &HierarchySpace, psi0: &[C64]) -> Self {
        let dim = psi0.len();
        let mut psi = vec![C64::new(0.0, 0.0); space.len() * dim];
        psi[..dim].copy_from_slice(psi0);
        HopsState {
            t: 0.0,
            psi,
            shift: vec![C64::new(0.0, 0.0); space.n_modes()],
            log_scale: 0.0,
        }
    }
}

/// Per-mode constants flattened over environments.
#[derive(Clone, Debug)]
pub struct ModeTable {
    pub g: Vec<C64>,
    pub w: Vec<C64>,
    pub env: Vec<usize>,
}

impl ModeTable {
    pub fn from_system(sys: &SystemSpec) -> Self {
        let mut g = Vec::new();
        let mut w = Vec::new();
        let mut env = Vec::new();
        for (n, c) in sys.couplings.iter().enumerate() {
            for t in &c.bath.terms {
                g.push(t.g);
                w.push(t.w);
                env.push(n);
            }
        }
        ModeTable { g, w, env }
    }
}

/// Read-only tables shared by all trajectories of one system/space pair.
pub struct HopsOperator<'a> {
    space: &'a HierarchySpace,
    dim: usize,
    n_env: usize,
    modes: ModeTable,
    minus_i_h: Op,
    l_ops: Vec<Op>,
    l_dag: Vec<Op>,
    k_dot_w: Vec<C64>,
}

/// Scratch buffers reused across right-hand-side evaluations.
pub struct RhsScratch {
    zeta: Vec<C64>,
    ldag_expect: Vec<C64>,
    up_ops: Vec<Op>,
    tmp: Vec<C64>,
}

impl<'a> HopsOperator<'a> {
    pub fn new(sys: &SystemSpec, space: &'a HierarchySpace) -> Result<Self> {
        sys.validate()?;
        let modes = ModeTable::from_system(sys);
        if modes.g.len() != space.n_modes() {
            return Err(HopsError::Dimension(format!(
                "system has {} modes but index space was built for {}",
                modes.g.len(),
                space.n_modes()
            )));
        }
        let mut k_dot_w = Vec::with_capacity(space.len());
        for idx in 0..space.len() {
            let k = space.kvec(idx);
            let mut acc = C64::new(0.0, 0.0);
            for (kj, wj) in k.iter().zip(&modes.w) {
                acc += (*kj as f64) * wj;
            }
            k_dot_w.push(acc);
        }
        Ok(HopsOperator {
            space,
            dim: sys.dim(),
            n_env: sys.couplings.len(),
            minus_i_h: sys.h.scaled(C64::new(0.0, -1.0)),
            l_ops: sys.couplings.iter().map(|c| c.op.clone()).collect(),
            l_dag: sys.couplings.iter().map(|c| c.op.adjoint()).collect(),
            modes,
            k_dot_w,
        })
    }

    pub fn scratch(&self) -> RhsScratch {
        RhsScratch {
            zeta: vec![C64::new(0.0, 0.0); self.n_env],
            ldag_expect: vec![C64::new(0.0, 0.0); self.n_env],
            up_ops: vec![Op::zeros(self.dim); self.n_env],
            tmp: vec![C64::new(0.0, 0.0); self.dim],
        }
    }

    pub fn state_len(&self) -> usize {
        self.space.len() * self.dim
    }

    /// Closure value standing in for psi(k + e_j) above the top layer.
    pub fn terminator_state(
        &self,
        psi: &[C64],
        top_idx: usize,
        j: usize,
        mode: Terminator,
    ) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        if mode == Terminator::Rescaled {
            self.terminator_into(psi, top_idx, j, &mut out);
        }
        out
    }

    fn terminator_into(&self, psi: &[C64], top_idx: usize, j: usize, out: &mut [C64]) {
        let d = self.dim;
        out.fill(C64::new(0.0, 0.0));
        let k = self.space.kvec(top_idx);
        let denom = self.k_dot_w[top_idx] + self.modes.w[j];
        debug_assert!(denom.norm() > 0.0, "k.w vanishes although Re(w) > 0");
        for i in 0..self.space.n_modes() {
            let ki_up = k[i] as f64 + if i == j { 1.0 } else { 0.0 };
            if ki_up == 0.0 {
                continue;
            }
            let src = if i == j {
                top_idx
            } else {
                // k + e_j - e_i with k_i > 0 stays inside the top layer
                match self.space.down(top_idx, i).and_then(|d| self.space.up(d, j)) {
                    Some(p) => p,
                    None => continue,
                }
            };
            let coeff = ki_up * self.modes.g[i] / denom;
            self.l_ops[self.modes.env[i]].gaxpy(coeff, &psi[src * d..(src + 1) * d], out);
        }
    }

    /// Assemble d(psi)/dt (and d(shift)/dt for the nonlinear variant).
    ///
    /// `zstar` holds the conjugate noise value of each environment at the
    /// evaluation time.
    pub fn rhs(
        &self,
        variant: Variant,
        terminator: Terminator,
        psi: &[C64],
        shift: &[C64],
        zstar: &[C64],
        out_psi: &mut [C64],
        out_shift: &mut [C64],
        scratch: &mut RhsScratch,
    ) -> Result<()> {
        let d = self.dim;
        let m = self.space.n_modes();
        let order = self.space.order();

        match variant {
            Variant::Linear => {
                scratch.zeta.copy_from_slice(zstar);
                for n in 0..self.n_env {
                    scratch.up_ops[n].clone_from(&self.l_dag[n]);
                }
            }
            Variant::Nonlinear => {
                let psi0 = &psi[..d];
                let nrm2 = psi0.iter().map(|x| x.norm_sqr()).sum::<f64>();
                if !(nrm2 > 1e-600) {
                    return Err(HopsError::Trajectory(
                        "physical component has zero norm; normalized expectation undefined"
                            .into(),
                    ));
                }
                for n in 0..self.n_env {
                    let expect = self.l_dag[n].quadratic_form(psi0) / nrm2;
                    scratch.ldag_expect[n] = expect;
                    let op = &mut scratch.up_ops[n];
                    op.clone_from(&self.l_dag[n]);
                    for i in 0..d {
                        let v = op.at(i, i) - expect;
                        op.set(i, i, v);
                    }
                }
                for n in 0..self.n_env {
                    scratch.zeta[n] = zstar[n];
                }
                for j in 0..m {
                    scratch.zeta[self.modes.env[j]] += shift[j];
                }
                for j in 0..m {
                    out_shift[j] = -self.modes.w[j].conj() * shift[j]
                        + self.modes.g[j].conj() * scratch.ldag_expect[self.modes.env[j]];
                }
            }
        }

        let minus_one = C64::new(-1.0, 0.0);
        for idx in 0..self.space.len() {
            let x = &psi[idx * d..(idx + 1) * d];
            let y = &mut out_psi[idx * d..(idx + 1) * d];
            self.minus_i_h.apply(x, y);
            axpy(-self.k_dot_w[idx], x, y);
            for n in 0..self.n_env {
                self.l_ops[n].gaxpy(scratch.zeta[n], x, y);
            }
            let k = self.space.kvec(idx);
            for j in 0..m {
                let kj = k[j];
                if kj > 0 {
                    let down = self.space.down(idx, j).expect("down neighbor exists");
                    self.l_ops[self.modes.env[j]].gaxpy(
                        (kj as f64) * self.modes.g[j],
                        &psi[down * d..(down + 1) * d],
                        y,
                    );
                }
            }
            if self.space.grade(idx) < order {
                for j in 0..m {
                    let up = self.space.up(idx, j).expect("up neighbor exists");
                    scratch.up_ops[self.modes.env[j]].gaxpy(
                        minus_one,
                        &psi[up * d..(up + 1) * d],
                        y,
                    );
                }
            } else if terminator == Terminator::Rescaled {
                for j in 0..m {
                    self.terminator_into(psi, idx, j, &mut scratch.tmp);
                    let y = &mut out_psi[idx * d..(idx + 1) * d];
                    scratch.up_ops[self.modes.env[j]].gaxpy(minus_one, &scratch.tmp, y);
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of the linear right-hand side.
pub fn linear_rhs(
    sys: &SystemSpec,
    space: &HierarchySpace,
    state: &HopsState,
    zstar: &[C64],
    terminator: Terminator,
) -> Result<Vec<C64>> {
    let op = HopsOperator::new(sys, space)?;
    let mut out = vec![C64::new(0.0, 0.0); op.state_len()];
    let mut out_shift = vec![C64::new(0.0, 0.0); space.n_modes()];
    let mut scratch = op.scratch();
    op.rhs(
        Variant::Linear,
        terminator,
        &state.psi,
        &state.shift,
        zstar,
        &mut out,
        &mut out_shift,
        &mut scratch,
    )?;
    Ok(out)
}

/// Free-function form of the nonlinear right-hand side.
pub fn nonlinear_rhs(
    sys: &SystemSpec,
    space: &HierarchySpace,
    state: &HopsState,
    zstar: &[C64],
    terminator: Terminator,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let op = HopsOperator::new(sys, space)?;
    let mut out = vec![C64::new(0.0, 0.0); op.state_len()];
    let mut out_shift = vec![C64::new(0.0, 0.0); space.n_modes()];
    let mut scratch = op.scratch();
    op.rhs(
        Variant::Nonlinear,
        terminator,
        &state.psi,
        &state.shift,
        zstar,
        &mut out,
        &mut out_shift,
        &mut scratch,
    )?;
    Ok((out, out_shift))
}

#[derive(Clone, Debug)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub t_max: f64,
    pub variant: Variant,
    pub terminator: Terminator,
    /// Nonlinear runs rescale the hierarchy when the physical norm leaves
    /// [rescale_floor, rescale_ceil].
    pub rescale_floor: f64,
    pub rescale_ceil: f64,
    /// Also record shift accumulators and coupling expectations per step.
    pub record_diagnostics: bool,
}

impl IntegrationOptions {
    pub fn new(dt: f64, t_max: f64, variant: Variant) -> Self {
        IntegrationOptions {
            dt,
            t_max,
            variant,
            terminator: Terminator::Rescaled,
            rescale_floor: 1e-2,
            rescale_ceil: 1e2,
            record_diagnostics: false,
        }
    }
}

/// Physical-component timeline of one trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    /// psi(0) at each output time as stored (rescaling already applied).
    pub psi0: Vec<C64>,
    /// Norm of the stored psi(0).
    pub norms: Vec<f64>,
    /// log of the factor removed by rescaling up to this time.
    pub log_scale: Vec<f64>,
    /// Diagnostics: shift accumulators per step (n_t x n_modes).
    pub shift: Option<Vec<C64>>,
    /// Diagnostics: <L^dag> per environment per step (n_t x n_env).
    pub ldag: Option<Vec<C64>>,
}

impl Trajectory {
    pub fn psi0_at(&self, step: usize) -> &[C64] {
        &self.psi0[step * self.dim..(step + 1) * self.dim]
    }
}

/// Integrate one trajectory with fixed-step RK4.
///
/// `noise` supplies one path per environment, sampled at dt/2 so that the
/// half-step stages use exact values rather than interpolants.
pub fn integrate_trajectory(
    sys: &SystemSpec,
    space: &HierarchySpace,
    noise: &[NoisePath],
    psi0: &[C64],
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    let op = HopsOperator::new(sys, space)?;
    integrate_with_operator(&op, noise, psi0, opts)
}

pub(crate) fn integrate_with_operator(
    op: &HopsOperator,
    noise: &[NoisePath],
    psi0: &[C64],
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    let d = op.dim;
    let m = op.space.n_modes();
    if psi0.len() != d {
        return Err(HopsError::Dimension(format!(
            "initial state has {} components, system dimension is {d}",
            psi0.len()
        )));
    }
    if noise.len() != op.n_env {
        return Err(HopsError::Dimension(format!(
            "{} noise paths supplied for {} environments",
            noise.len(),
            op.n_env
        )));
    }
    if !(opts.dt > 0.0) || opts.t_max < opts.dt {
        return Err(HopsError::InvalidInput(format!(
            "invalid time grid: dt = {}, t_max = {}",
            opts.dt, opts.t_max
        )));
    }
    let n_steps = (opts.t_max / opts.dt + 1e-9).floor() as usize;
    let half_dt = opts.dt / 2.0;
    for (n, p) in noise.iter().enumerate() {
        if (p.dt - half_dt).abs() > 1e-9 * half_dt {
            return Err(HopsError::InvalidInput(format!(
                "noise path {n} sampled at {} but the integrator needs dt/2 = {half_dt}",
                p.dt
            )));
        }
        if p.len() < 2 * n_steps + 1 {
            return Err(HopsError::InvalidInput(format!(
                "noise path {n} has {} samples, {} required",
                p.len(),
                2 * n_steps + 1
            )));
        }
    }

    let len = op.state_len();
    let mut state = HopsState::initial(op.space, psi0);
    let mut scratch = op.scratch();
    let mut k1 = vec![C64::new(0.0, 0.0); len];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut ytmp = k1.clone();
    let mut s1 = vec![C64::new(0.0, 0.0); m];
    let mut s2 = s1.clone();
    let mut s3 = s1.clone();
    let mut s4 = s1.clone();
    let mut stmp = s1.clone();
    let mut zstar = vec![C64::new(0.0, 0.0); op.n_env];

    let mut out = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        dim: d,
        psi0: Vec::with_capacity((n_steps + 1) * d),
        norms: Vec::with_capacity(n_steps + 1),
        log_scale: Vec::with_capacity(n_steps + 1),
        shift: opts.record_diagnostics.then(Vec::new),
        ldag: opts.record_diagnostics.then(Vec::new),
    };

    let record =
        |state: &HopsState, out: &mut Trajectory, scratch: &mut RhsScratch, op: &HopsOperator| {
            out.times.push(state.t);
            out.psi0.extend_from_slice(&state.psi[..d]);
            out.norms.push(norm(&state.psi[..d]));
            out.log_scale.push(state.log_scale);
            if let Some(sh) = out.shift.as_mut() {
                sh.extend_from_slice(&state.shift);
            }
            if let Some(ld) = out.ldag.as_mut() {
                let psi0 = &state.psi[..d];
                let nrm2 = psi0.iter().map(|x| x.norm_sqr()).sum::<f64>().max(1e-300);
                for n in 0..op.n_env {
                    scratch.ldag_expect[n] = op.l_dag[n].quadratic_form(psi0) / nrm2;
                }
                ld.extend_from_slice(&scratch.ldag_expect[..op.n_env]);
            }
        };
    record(&state, &mut out, &mut scratch, op);

    for step in 0..n_steps {
        let sub = 2 * step;
        // stage 1 at t
        for (n, p) in noise.iter().enumerate() {
            zstar[n] = p.samples[sub];
        }
        op.rhs(opts.variant, opts.terminator, &state.psi, &state.shift, &zstar, &mut k1, &mut s1, &mut scratch)?;
        // stages 2 and 3 at t + dt/2
        for (n, p) in noise.iter().enumerate() {
            zstar[n] = p.samples[sub + 1];
        }
        stage(&state.psi, &k1, 0.5 * opts.dt, &mut ytmp);
        stage(&state.shift, &s1, 0.5 * opts.dt, &mut stmp);
        op.rhs(opts.variant, opts.terminator, &ytmp, &stmp, &zstar, &mut k2, &mut s2, &mut scratch)?;
        stage(&state.psi, &k2, 0.5 * opts.dt, &mut ytmp);
        stage(&state.shift, &s2, 0.5 * opts.dt, &mut stmp);
        op.rhs(opts.variant, opts.terminator, &ytmp, &stmp, &zstar, &mut k3, &mut s3, &mut scratch)?;
        // stage 4 at t + dt
        for (n, p) in noise.iter().enumerate() {
            zstar[n] = p.samples[sub + 2];
        }
        stage(&state.psi, &k3, opts.dt, &mut ytmp);
        stage(&state.shift, &s3, opts.dt, &mut stmp);
        op.rhs(opts.variant, opts.terminator, &ytmp, &stmp, &zstar, &mut k4, &mut s4, &mut scratch)?;

        let w = opts.dt / 6.0;
        for i in 0..len {
            state.psi[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        for j in 0..m {
            state.shift[j] += w * (s1[j] + 2.0 * (s2[j] + s3[j]) + s4[j]);
        }
        state.t = (step + 1) as f64 * opts.dt;

        let nrm = norm(&state.psi[..d]);
        if !nrm.is_finite() {
            return Err(HopsError::NonFinite { step });
        }
        match opts.variant {
            Variant::Nonlinear => {
                if nrm < opts.rescale_floor || nrm > opts.rescale_ceil {
                    if nrm <= 0.0 {
                        return Err(HopsError::Trajectory(format!(
                            "physical norm collapsed to zero at step {step}"
                        )));
                    }
                    scale(C64::new(1.0 / nrm, 0.0), &mut state.psi);
                    state.log_scale += nrm.ln();
                }
            }
            Variant::Linear => {
                if nrm > 1e100 {
                    return Err(HopsError::Trajectory(format!(
                        "linear trajectory overflow at step {step}: |psi(0)| = {nrm:e}"
                    )));
                }
            }
        }
        record(&state, &mut out, &mut scratch, op);
    }
    Ok(out)
}

#[inline]
fn stage(base: &[C64], slope: &[C64], factor: f64, out: &mut [C64]) {
    for ((o, b), s) in out.iter_mut().zip(base).zip(slope) {
        *o = b + factor * s;
    }
}
