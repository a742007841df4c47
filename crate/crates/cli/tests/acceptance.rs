//! Acceptance suite: one test per shipped guarantee, each printing a
//! pass/fail line (run with `--nocapture` to see them as they complete).
//!
//! The strong-coupling two-level benchmark is validated against an exact
//! damped-mode master equation; the pure-dephasing model against its
//! closed-form decoherence function; bath expansions against direct
//! quadrature; noise statistics against their defining moments; spectra
//! against structural identities; and the whole pipeline against itself
//! for bit-reproducibility across worker counts.

use std::sync::OnceLock;

use hops_core::bath::{pade_coth_terms, BathSpec, ExpTerm, ExpansionOptions, LorentzPeak, SpectralDensity};
use hops_core::ensemble::{run_ensemble, DensityTrajectory, EnsembleOptions};
use hops_core::hierarchy::build_space;
use hops_core::linalg::{C64, Op};
use hops_core::models;
use hops_core::noise::{noise_statistics, NoiseGenerator, NoiseOptions, NoisePath};
use hops_core::observables::{absorption_spectrum, dipole_autocorrelation, expectation, SpectrumOptions};
use hops_core::reference::{dephasing_coherence, pseudomode_evolve, PseudoModeConfig};
use hops_core::trajectory::{integrate_trajectory, IntegrationOptions, Terminator, Variant};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} -- {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// ---------------------------------------------------------------- shared

const SB_DT: f64 = 0.01;
const SB_TMAX: f64 = 10.0;

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

/// <sigma_z>(t) of the strong-coupling benchmark from the damped-mode
/// master equation, on the ensemble output grid.
fn oracle_sigma_z() -> &'static Vec<f64> {
    static ORACLE: OnceLock<Vec<f64>> = OnceLock::new();
    ORACLE.get_or_init(|| {
        let sys = models::spin_boson(1.0, 0.0, fig_bath());
        let mut rho0 = Op::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let cfg = PseudoModeConfig { initial_cutoff: 10, max_total_dim: 128, tol: 1e-6 };
        // dt = 2e-3 with every 5th output lands on the 0.01 ensemble grid
        let run = pseudomode_evolve(&sys, &cfg, &rho0, 2e-3, SB_TMAX, 5).unwrap();
        run.states.iter().map(|s| (s.at(0, 0) - s.at(1, 1)).re).collect()
    })
}

struct SigmaZRun {
    values: Vec<f64>,
    stderr: Vec<f64>,
}

fn spin_boson_sigma_z(order: usize, variant: Variant, n_traj: u64, seed: u64) -> SigmaZRun {
    let sys = models::spin_boson(1.0, 0.0, fig_bath());
    let space = build_space(1, order, 1 << 16).unwrap();
    let mut opts = EnsembleOptions::new(n_traj, seed, variant, SB_DT, SB_TMAX);
    opts.noise = NoiseOptions { omega_max_factor: 40.0, ..NoiseOptions::default() };
    let rho = run_ensemble(&sys, &space, &up_state(), &opts).unwrap();
    let sz = expectation(&models::sigma_z(), &rho).unwrap();
    SigmaZRun { values: sz.real_values(), stderr: sz.stderr }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ------------------------------------------------------------- criteria

#[test]
fn c1_strong_coupling_ground_truth() {
    let run = spin_boson_sigma_z(8, Variant::Nonlinear, 10_000, 7);
    let oracle = oracle_sigma_z();
    let dev = sup_diff(&run.values, oracle);
    verdict(
        "1 (strong-coupling ground truth)",
        dev < 0.05,
        &format!("sup |<sigma_z> - exact| = {dev:.4} over t in [0, 10], tolerance 0.05"),
    );
}

#[test]
fn c2_hierarchy_order_convergence() {
    let k8 = spin_boson_sigma_z(8, Variant::Nonlinear, 10_000, 7);
    let k4 = spin_boson_sigma_z(4, Variant::Nonlinear, 10_000, 7);
    let dev = sup_diff(&k8.values, &k4.values);
    verdict(
        "2 (order convergence K=4 vs K=8)",
        dev < 0.01,
        &format!("sup difference = {dev:.5}, tolerance 0.01"),
    );
}

#[test]
fn c3_linear_vs_nonlinear_estimator() {
    let nl = spin_boson_sigma_z(8, Variant::Nonlinear, 10_000, 7);
    let li = spin_boson_sigma_z(8, Variant::Linear, 10_000, 7);
    let max_se_nl = nl.stderr.iter().cloned().fold(0.0, f64::max);
    let max_se_li = li.stderr.iter().cloned().fold(0.0, f64::max);
    let oracle = oracle_sigma_z();
    // both estimators agree with the exact result within 3 standard errors
    let ok_within = |run: &SigmaZRun| {
        run.values
            .iter()
            .zip(&run.stderr)
            .zip(oracle)
            .all(|((v, se), o)| (v - o).abs() <= 3.0 * se + 5e-3)
    };
    let nl_ok = ok_within(&nl);
    let li_ok = ok_within(&li);
    let pass = max_se_li > max_se_nl && nl_ok && li_ok;
    verdict(
        "3 (linear fluctuations exceed nonlinear)",
        pass,
        &format!(
            "max SE linear {max_se_li:.4} vs nonlinear {max_se_nl:.4}; \
             3-sigma agreement: nonlinear {nl_ok}, linear {li_ok}"
        ),
    );
}

#[test]
fn c4_pure_dephasing_exactness() {
    let eps = 1.0;
    let bath = BathSpec::new(
        vec![ExpTerm::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap()],
        0.0,
    )
    .unwrap();
    let sys = models::spin_boson(0.0, eps, bath.clone());
    // stochastic nonlinear ensemble: |rho_01| within 3 SE of the analytic law
    let space = build_space(1, 8, 1 << 12).unwrap();
    let dt = 0.005;
    let t_max = 2.0;
    let mut opts = EnsembleOptions::new(10_000, 11, Variant::Nonlinear, dt, t_max);
    opts.noise = NoiseOptions { omega_max_factor: 40.0, ..NoiseOptions::default() };
    let plus = vec![
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    ];
    let rho = run_ensemble(&sys, &space, &plus, &opts).unwrap();
    let mut worst_sigma: f64 = 0.0;
    for (step, &t) in rho.times.iter().enumerate() {
        let r01 = rho.rho_at(step)[1];
        let se = rho.stderr[step * 4 + 1];
        let expect = 0.5 * dephasing_coherence(eps, &bath, t).norm();
        let dev = (r01.norm() - expect).abs();
        worst_sigma = worst_sigma.max(dev / se.max(1e-12));
    }
    let stochastic_ok = worst_sigma <= 3.0;

    // deterministic route: the driving-free linear trajectory factorizes,
    // |c_0(t)/c_0(0)|^4 equals the coherence modulus exactly
    let space = build_space(1, 12, 1 << 12).unwrap();
    let n_steps = (t_max / 0.001 + 1e-9).floor() as usize;
    let zero = vec![NoisePath::zeros(0.0005, 2 * n_steps + 1)];
    let int_opts = IntegrationOptions::new(0.001, t_max, Variant::Linear);
    let traj = integrate_trajectory(&sys, &space, &zero, &plus, &int_opts).unwrap();
    let c00 = traj.psi0_at(0)[0];
    let mut worst_det: f64 = 0.0;
    for (step, &t) in traj.times.iter().enumerate() {
        let ratio = (traj.psi0_at(step)[0] / c00).norm().powi(4);
        let expect = dephasing_coherence(eps, &bath, t).norm();
        worst_det = worst_det.max((ratio - expect).abs());
    }
    let deterministic_ok = worst_det < 1e-4;
    verdict(
        "4 (pure-dephasing exactness)",
        stochastic_ok && deterministic_ok,
        &format!(
            "ensemble worst deviation {worst_sigma:.2} sigma (<= 3); \
             deterministic defect {worst_det:.2e} (< 1e-4)"
        ),
    );
}

#[test]
fn c5_finite_temperature_expansion() {
    let j = SpectralDensity::DrudeLorentz { lambda: 1.0, gamma_c: 0.5 };
    let scheme = pade_coth_terms(6).unwrap();
    let opts = ExpansionOptions { tau_max: 10.0 / 0.5, n_grid: 64, tolerance: 1e-5 };
    match hops_core::bath::expand_correlation(&j, 2.0, &scheme, &opts) {
        Ok(e) => verdict(
            "5 (finite-temperature expansion)",
            e.max_rel_error < 1e-5,
            &format!(
                "Drude T=2, 6 thermal poles: max rel deviation from quadrature {:.2e} on (0, 10/gamma_c]",
                e.max_rel_error
            ),
        ),
        Err(err) => verdict("5 (finite-temperature expansion)", false, &format!("{err}")),
    }
}

#[test]
fn c6_noise_statistics() {
    let bath = fig_bath();
    let opts = NoiseOptions { omega_max_factor: 150.0, ..NoiseOptions::default() };
    let gen = NoiseGenerator::new(&bath, 4.0, 0.25, &opts).unwrap();
    let paths: Vec<NoisePath> = (0..10_000).map(|id| gen.sample(3, id, 0)).collect();
    let stats = noise_statistics(&paths, &bath).unwrap();
    let pass = stats.max_cov_dev < 5.0 && stats.max_pseudo_dev < 5.0 && stats.max_mean_dev < 5.0;
    verdict(
        "6 (noise statistics)",
        pass,
        &format!(
            "10^4 paths: covariance {:.2} / pseudo {:.2} / mean {:.2} standard errors (< 5)",
            stats.max_cov_dev, stats.max_pseudo_dev, stats.max_mean_dev
        ),
    );
}

fn chain_bath() -> BathSpec {
    let j = SpectralDensity::LorentzianSum {
        peaks: vec![LorentzPeak { weight: 2.08, center: 2.0, width: 0.4 }],
    };
    let scheme = pade_coth_terms(2).unwrap();
    let opts = ExpansionOptions { tau_max: 20.0, n_grid: 24, tolerance: 0.05 };
    hops_core::bath::expand_correlation(&j, 0.2, &scheme, &opts).unwrap().bath
}

fn chain_spectrum(order: usize) -> hops_core::observables::SpectrumResult {
    let (sys, dip) = models::linear_chain(7, 0.0, -0.5, Some(chain_bath()), 1.0).unwrap();
    let space = build_space(sys.n_modes(), order, 1 << 20).unwrap();
    let m = dipole_autocorrelation(&sys, &space, &dip, 0.02, 30.0, Terminator::Rescaled).unwrap();
    absorption_spectrum(&m, &SpectrumOptions { damping: 0.05, ..Default::default() }).unwrap()
}

#[test]
fn c7_absorption_structure() {
    // monomer without bath: single peak at the site energy
    let eps = 1.3;
    let (sys, dip) = models::linear_chain(1, eps, 0.0, None, 0.9).unwrap();
    let space = build_space(0, 0, 4).unwrap();
    let m = dipole_autocorrelation(&sys, &space, &dip, 0.01, 60.0, Terminator::Rescaled).unwrap();
    let spec = absorption_spectrum(&m, &SpectrumOptions { damping: 0.05, ..Default::default() })
        .unwrap();
    let peak_nu = spec.nu[spec.peak_index()];
    let monomer_ok = (peak_nu - eps).abs() <= spec.grid_step();
    // sum rule: integral of A equals pi mu_tot^2
    let sum_rule = spec.integral();
    let sum_expect = std::f64::consts::PI * m.mu_tot_sq;
    let sum_ok = (sum_rule - sum_expect).abs() < 0.01 * sum_expect;

    // dimer with parallel dipoles: peak at eps + V
    let (eps2, v) = (0.8, -0.45);
    let (sys2, dip2) = models::linear_chain(2, eps2, v, None, 1.0).unwrap();
    let space2 = build_space(0, 0, 4).unwrap();
    let m2 =
        dipole_autocorrelation(&sys2, &space2, &dip2, 0.01, 60.0, Terminator::Rescaled).unwrap();
    let spec2 = absorption_spectrum(&m2, &SpectrumOptions { damping: 0.05, ..Default::default() })
        .unwrap();
    let dimer_peak = spec2.nu[spec2.peak_index()];
    let dimer_ok = (dimer_peak - (eps2 + v)).abs() <= spec2.grid_step();

    // 7-site chain: consecutive hierarchy orders agree better at low energy
    let s1 = chain_spectrum(1);
    let s2 = chain_spectrum(2);
    assert_eq!(s1.nu.len(), s2.nu.len());
    let a_max = s2.a.iter().cloned().fold(0.0, f64::max);
    let support: Vec<usize> =
        (0..s2.a.len()).filter(|&i| s2.a[i] > 0.02 * a_max).collect();
    let lo = *support.first().unwrap();
    let hi = *support.last().unwrap();
    let mid = (lo + hi) / 2;
    // deviations are normalized per region: the low half carries the
    // dominant band, so raw magnitudes would only compare peak heights
    let region_dev = |a: usize, b: usize| -> f64 {
        let dev: f64 = (a..=b).map(|i| (s1.a[i] - s2.a[i]).abs()).fold(0.0, f64::max);
        let scale: f64 = (a..=b).map(|i| s2.a[i].abs()).fold(0.0, f64::max);
        dev / scale
    };
    let dev_low = region_dev(lo, mid);
    let dev_high = region_dev(mid, hi);
    let region_ok = dev_low < dev_high;

    verdict(
        "7 (absorption structure)",
        monomer_ok && sum_ok && dimer_ok && region_ok,
        &format!(
            "monomer peak at {peak_nu:.4} (eps = {eps}); sum rule {sum_rule:.4} vs {sum_expect:.4}; \
             dimer peak at {dimer_peak:.4} (eps+V = {:.4}); \
             relative low-energy deviation {dev_low:.3} < high-energy {dev_high:.3}",
            eps2 + v
        ),
    );
}

fn fmo_populations(order: usize, n_traj: u64) -> (DensityTrajectory, Vec<Vec<f64>>) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/fmo_7site.dat");
    let mut sys = models::fmo_from_file(path).unwrap();
    // uniform offset: a global phase that keeps the explicit stepper stable
    sys.h = sys.h.sub(&Op::identity(7).scaled(C64::new(12400.0, 0.0)));
    let space = build_space(sys.n_modes(), order, 1 << 20).unwrap();
    let mut psi0 = vec![C64::new(0.0, 0.0); 7];
    psi0[0] = C64::new(1.0, 0.0);
    let mut opts = EnsembleOptions::new(n_traj, 5, Variant::Nonlinear, 2.5e-4, 0.1);
    opts.noise = NoiseOptions { omega_max_factor: 6.0, ..NoiseOptions::default() };
    let rho = run_ensemble(&sys, &space, &psi0, &opts).unwrap();
    let pops = (0..rho.times.len())
        .map(|s| (0..7).map(|i| rho.rho_at(s)[i * 7 + i].re).collect())
        .collect();
    (rho, pops)
}

#[test]
fn c8_seven_site_property_suite() {
    let n_traj = 100;
    let (rho1, p1) = fmo_populations(1, n_traj);
    let (_, p2) = fmo_populations(2, n_traj);
    let mut in_range = true;
    let mut trace_ok = true;
    for (step, pops) in p1.iter().enumerate() {
        let mut trace_se = 0.0;
        for i in 0..7 {
            let se = rho1.stderr[step * 49 + i * 8];
            trace_se += se;
            if pops[i] < -5.0 * se || pops[i] > 1.0 + 5.0 * se {
                in_range = false;
            }
        }
        let total: f64 = pops.iter().sum();
        if (total - 1.0).abs() > 5.0 * trace_se + 1e-12 {
            trace_ok = false;
        }
    }
    let dev = p1
        .iter()
        .flatten()
        .zip(p2.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let orders_ok = dev < 0.02;
    verdict(
        "8 (seven-site property suite)",
        in_range && trace_ok && orders_ok,
        &format!(
            "populations in range: {in_range}; unit trace: {trace_ok}; \
             sup |K=1 - K=2| = {dev:.4} (< 0.02)"
        ),
    );
}

#[test]
fn c9_bit_reproducibility_across_workers() {
    use std::process::Command;
    let dir = std::env::temp_dir().join(format!("hops-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let base = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/spin_boson.conf"
    ))
    .unwrap();
    let mut outputs: Vec<(usize, String, String)> = Vec::new();
    for workers in [1usize, 2, 8] {
        let cfg = format!(
            "{base}\nensemble.workers = {workers}\n"
        )
        .replace("ensemble.n_traj = 10000", "ensemble.n_traj = 96")
        .replace("integrator.t_max = 10.0", "integrator.t_max = 1.0");
        let cfg_path = dir.join(format!("w{workers}.conf"));
        std::fs::write(&cfg_path, cfg).unwrap();
        let out_dir = dir.join(format!("out{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_hops"))
            .args([
                "ensemble",
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let density = std::fs::read_to_string(out_dir.join("density.csv")).unwrap();
        let observables = std::fs::read_to_string(out_dir.join("observables.csv")).unwrap();
        outputs.push((workers, density, observables));
    }
    // the header embeds the worker count; every other byte must agree
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.starts_with("# ensemble.workers"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let pass = outputs.windows(2).all(|w| {
        strip(&w[0].1) == strip(&w[1].1) && strip(&w[0].2) == strip(&w[1].2)
    });
    verdict(
        "9 (bit reproducibility over 1/2/8 workers)",
        pass,
        "density and observable tables identical outside the worker-count header line",
    );
    std::fs::remove_dir_all(&dir).ok();
}
