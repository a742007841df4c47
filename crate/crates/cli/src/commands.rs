//! Subcommand implementations. Each returns the list of files written.

use std::path::{Path, PathBuf};

use hops_core::ensemble::run_ensemble;
use hops_core::linalg::{C64, Op};
use hops_core::models;
use hops_core::noise::{noise_statistics, NoiseGenerator, NoisePath};
use hops_core::observables::{
    absorption_spectrum, dipole_autocorrelation, expectation, SpectrumOptions,
};
use hops_core::reference::{dephasing_coherence, pseudomode_evolve, PseudoModeConfig};
use hops_core::trajectory::Variant;

use crate::build;
use crate::config::{CliError, CliResult, Config};
use crate::report::CsvWriter;

/// Expand the configured bath and write the term table.
pub fn cmd_expand_bath(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    let expanded = build::expanded_bath(cfg)?
        .ok_or_else(|| CliError::Config("expand-bath requires bath.variant != none".into()))?;
    let mut w = CsvWriter::new("expand-bath", cfg);
    w.comment(&format!("max_validation_rel_error = {}", expanded.max_rel_error));
    w.comment(&format!("temperature = {}", expanded.bath.temperature));
    w.header(&["index", "g_re", "g_im", "w_re", "w_im"]);
    for (i, t) in expanded.bath.terms.iter().enumerate() {
        w.row(&[
            i.to_string(),
            format!("{}", t.g.re),
            format!("{}", t.g.im),
            format!("{}", t.w.re),
            format!("{}", t.w.im),
        ]);
    }
    Ok(vec![w.write_to(out, "expand_bath.csv")?])
}

/// Run the trajectory ensemble; write the density matrix and observables.
pub fn cmd_ensemble(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    let built = build::system(cfg)?;
    let order = cfg.usize("hierarchy.order")?;
    let space = build::space_for(cfg, &built.sys, order)?;
    let psi0 = build::initial_state(cfg, built.sys.dim())?;
    let opts = build::ensemble_options(cfg)?;
    let rho = run_ensemble(&built.sys, &space, &psi0, &opts)?;
    if rho.n_aborted > 0 {
        eprintln!(
            "warning: {} of {} trajectories aborted and were excluded",
            rho.n_aborted, opts.n_traj
        );
    }
    let d = rho.dim;

    let mut w = CsvWriter::new("ensemble", cfg);
    w.comment(&format!("n_used = {}, n_aborted = {}", rho.n_used, rho.n_aborted));
    let mut cols = vec!["t".to_string()];
    for i in 0..d {
        for j in i..d {
            cols.push(format!("re_rho_{i}_{j}"));
            cols.push(format!("im_rho_{i}_{j}"));
            cols.push(format!("stderr_{i}_{j}"));
        }
    }
    w.header(&cols.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for (step, &t) in rho.times.iter().enumerate() {
        let r = rho.rho_at(step);
        let mut vals = vec![t];
        for i in 0..d {
            for j in i..d {
                vals.push(r[i * d + j].re);
                vals.push(r[i * d + j].im);
                vals.push(rho.stderr[step * d * d + i * d + j]);
            }
        }
        w.row_f64(&vals);
    }
    let density = w.write_to(out, "density.csv")?;

    let mut w = CsvWriter::new("ensemble", cfg);
    let mut cols: Vec<String> = vec!["t".into()];
    for i in 0..d {
        cols.push(format!("pop_{i}"));
        cols.push(format!("stderr_pop_{i}"));
    }
    if d == 2 {
        cols.push("sigma_z".into());
        cols.push("stderr_sigma_z".into());
    }
    w.header(&cols.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let pops: Vec<_> = (0..d)
        .map(|i| {
            let mut p = Op::zeros(d);
            p.set(i, i, C64::new(1.0, 0.0));
            expectation(&p, &rho).unwrap()
        })
        .collect();
    let sz = (d == 2).then(|| expectation(&models::sigma_z(), &rho).unwrap());
    for (step, &t) in rho.times.iter().enumerate() {
        let mut vals = vec![t];
        for p in &pops {
            vals.push(p.values[step].re);
            vals.push(p.stderr[step]);
        }
        if let Some(sz) = &sz {
            vals.push(sz.values[step].re);
            vals.push(sz.stderr[step]);
        }
        w.row_f64(&vals);
    }
    let observables = w.write_to(out, "observables.csv")?;
    Ok(vec![density, observables])
}

/// Deterministic absorption spectra, one file pair per hierarchy order.
pub fn cmd_spectrum(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    let built = build::system(cfg)?;
    let dipoles = built.dipoles.ok_or_else(|| {
        CliError::Config("spectrum requires a model with dipoles (system.dipole)".into())
    })?;
    let orders: Vec<usize> = match cfg.get("spectrum.orders") {
        Some(list) => list
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| {
                    CliError::Config(format!("spectrum.orders: bad integer {t:?}"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?,
        None => vec![cfg.usize("hierarchy.order")?],
    };
    let dt = cfg.f64("integrator.dt")?;
    let t_max = cfg.f64("integrator.t_max")?;
    let terminator = build::terminator(cfg)?;
    let spec_opts = SpectrumOptions {
        damping: cfg.f64("spectrum.damping")?,
        padding_factor: cfg.usize("spectrum.padding_factor")?,
        decay_warn_fraction: cfg.f64("spectrum.decay_warn_fraction")?,
    };
    let mut written = Vec::new();
    for &order in &orders {
        let space = build::space_for(cfg, &built.sys, order)?;
        let m = dipole_autocorrelation(&built.sys, &space, &dipoles, dt, t_max, terminator)?;
        let spec = absorption_spectrum(&m, &spec_opts)?;
        if spec.tail_warning {
            eprintln!(
                "warning: order {order}: correlation not decayed at t_max and no damping set"
            );
        }
        let mut w = CsvWriter::new("spectrum", cfg);
        w.comment(&format!("hierarchy_order = {order}"));
        w.comment(&format!("damping = {}", spec.damping));
        w.header(&["nu", "a"]);
        for (nu, a) in spec.nu.iter().zip(&spec.a) {
            w.row_f64(&[*nu, *a]);
        }
        written.push(w.write_to(out, &format!("spectrum_K{order}.csv"))?);

        let mut w = CsvWriter::new("spectrum", cfg);
        w.comment(&format!("hierarchy_order = {order}"));
        w.header(&["t", "re_m", "im_m"]);
        for (i, &t) in m.times.iter().enumerate() {
            w.row_f64(&[t, m.m[i].re, m.m[i].im]);
        }
        written.push(w.write_to(out, &format!("correlation_K{order}.csv"))?);
    }
    Ok(written)
}

/// Validation suites. Exit code 2 when a check fails its threshold.
pub fn cmd_validate(suite: &str, cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    match suite {
        "noise" => validate_noise(cfg, out),
        "oracle" => validate_oracle(cfg, out),
        "convergence" => validate_convergence(cfg, out),
        other => Err(CliError::Config(format!(
            "unknown validation suite {other:?} (expected noise, oracle or convergence)"
        ))),
    }
}

fn validate_noise(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    let expanded = build::expanded_bath(cfg)?
        .ok_or_else(|| CliError::Config("noise suite requires a bath".into()))?;
    let bath = expanded.bath;
    let n_paths = cfg.usize("validate.n_paths")?;
    let threshold = cfg.f64("validate.threshold")?;
    let dt = cfg.f64("integrator.dt")?;
    let t_max = cfg.f64("integrator.t_max")?;
    let seed = cfg.u64("ensemble.seed")?;
    let gen = NoiseGenerator::new(&bath, t_max, dt, &build::noise_options(cfg)?)?;
    let paths: Vec<NoisePath> =
        (0..n_paths as u64).map(|id| gen.sample(seed, id, 0)).collect();
    let stats = noise_statistics(&paths, &bath)?;

    let mut w = CsvWriter::new("validate noise", cfg);
    w.comment(&format!("n_paths = {n_paths}, threshold = {threshold} standard errors"));
    w.header(&["kind", "t", "s", "emp_re", "emp_im", "target_re", "target_im", "std_error", "deviation"]);
    for r in &stats.rows {
        w.row(&[
            r.kind.to_string(),
            format!("{}", r.t),
            format!("{}", r.s),
            format!("{}", r.empirical.re),
            format!("{}", r.empirical.im),
            format!("{}", r.target.re),
            format!("{}", r.target.im),
            format!("{}", r.std_error),
            format!("{}", r.deviation),
        ]);
    }
    let path = w.write_to(out, "validate_noise.csv")?;
    let worst = stats.max_mean_dev.max(stats.max_cov_dev).max(stats.max_pseudo_dev);
    println!(
        "noise statistics over {n_paths} paths: mean {:.2} / covariance {:.2} / pseudo {:.2} standard errors (threshold {threshold})",
        stats.max_mean_dev, stats.max_cov_dev, stats.max_pseudo_dev
    );
    if worst > threshold {
        return Err(CliError::Runtime(format!(
            "noise statistics deviate by {worst:.2} standard errors (threshold {threshold})"
        )));
    }
    Ok(vec![path])
}

fn validate_oracle(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    // cross-check the analytic dephasing formula against the damped-mode
    // propagator on a real-amplitude bath
    let g = cfg.get("oracle.g").map(|v| v.parse::<f64>()).transpose()
        .map_err(|_| CliError::Config("oracle.g: bad number".into()))?.unwrap_or(1.0);
    let w_re = cfg.get("oracle.w_re").map(|v| v.parse::<f64>()).transpose()
        .map_err(|_| CliError::Config("oracle.w_re: bad number".into()))?.unwrap_or(1.0);
    let w_im = cfg.get("oracle.w_im").map(|v| v.parse::<f64>()).transpose()
        .map_err(|_| CliError::Config("oracle.w_im: bad number".into()))?.unwrap_or(0.0);
    let eps = cfg.get("oracle.epsilon").map(|v| v.parse::<f64>()).transpose()
        .map_err(|_| CliError::Config("oracle.epsilon: bad number".into()))?.unwrap_or(0.5);

    let bath = hops_core::bath::BathSpec::new(
        vec![hops_core::bath::ExpTerm::new(C64::new(g, 0.0), C64::new(w_re, w_im))?],
        0.0,
    )?;
    let sys = hops_core::trajectory::SystemSpec::new(
        models::sigma_z().scaled(C64::new(0.5 * eps, 0.0)),
        vec![hops_core::trajectory::Coupling { op: models::sigma_z(), bath: bath.clone() }],
    )?;
    let mut rho0 = Op::zeros(2);
    rho0.set(0, 0, C64::new(0.5, 0.0));
    rho0.set(0, 1, C64::new(0.5, 0.0));
    rho0.set(1, 0, C64::new(0.5, 0.0));
    rho0.set(1, 1, C64::new(0.5, 0.0));
    let pm_cfg = PseudoModeConfig { initial_cutoff: 10, max_total_dim: 256, tol: 1e-7 };
    let run = pseudomode_evolve(&sys, &pm_cfg, &rho0, 5e-4, 2.0, 200)?;

    let mut w = CsvWriter::new("validate oracle", cfg);
    w.header(&["t", "analytic_re", "analytic_im", "damped_mode_re", "damped_mode_im", "deviation"]);
    let mut worst: f64 = 0.0;
    for (i, &t) in run.times.iter().enumerate() {
        let got = run.states[i].at(0, 1) / rho0.at(0, 1);
        let expect = dephasing_coherence(eps, &bath, t);
        let dev = (got - expect).norm();
        worst = worst.max(dev);
        w.row_f64(&[t, expect.re, expect.im, got.re, got.im, dev]);
    }
    let path = w.write_to(out, "validate_oracle.csv")?;
    println!("oracle cross-check: max |analytic - damped-mode| = {worst:.2e}");
    if worst > 1e-4 {
        return Err(CliError::Runtime(format!(
            "oracle disagreement {worst:.2e} exceeds 1e-4"
        )));
    }
    Ok(vec![path])
}

fn validate_convergence(cfg: &Config, out: &Path) -> CliResult<Vec<PathBuf>> {
    let built = build::system(cfg)?;
    let psi0 = build::initial_state(cfg, built.sys.dim())?;
    let n_traj = cfg.u64("validate.n_traj")?;
    let k_low = cfg.usize("validate.k_low")?;
    let k_high = cfg.usize("validate.k_high")?;
    let mut opts = build::ensemble_options(cfg)?;
    opts.n_traj = n_traj;
    opts.variant = Variant::Nonlinear;

    let run_at = |order: usize| -> CliResult<Vec<f64>> {
        let space = build::space_for(cfg, &built.sys, order)?;
        let rho = run_ensemble(&built.sys, &space, &psi0, &opts)?;
        // site populations as the convergence observable
        let d = rho.dim;
        Ok((0..rho.times.len())
            .flat_map(|s| {
                let r = rho.rho_at(s);
                (0..d).map(move |i| r[i * d + i].re).collect::<Vec<_>>()
            })
            .collect())
    };
    let lo = run_at(k_low)?;
    let hi = run_at(k_high)?;
    let sup = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let threshold = cfg.get("validate.convergence_tol").map(|v| v.parse::<f64>())
        .transpose().map_err(|_| CliError::Config("validate.convergence_tol: bad number".into()))?
        .unwrap_or(0.02);

    let mut w = CsvWriter::new("validate convergence", cfg);
    w.comment(&format!("orders compared: {k_low} vs {k_high}, n_traj = {n_traj}"));
    w.header(&["check", "value", "threshold", "pass"]);
    w.row(&[
        "population_order_convergence".into(),
        format!("{sup}"),
        format!("{threshold}"),
        format!("{}", sup <= threshold),
    ]);
    let path = w.write_to(out, "validate_convergence.csv")?;
    println!("hierarchy convergence: sup |pop(K={k_low}) - pop(K={k_high})| = {sup:.3e}");
    if sup > threshold {
        return Err(CliError::Runtime(format!(
            "population convergence defect {sup:.3e} exceeds {threshold}"
        )));
    }
    Ok(vec![path])
}
