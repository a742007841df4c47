//! scratch probe (removed before ship)
use hops_core::bath::{BathSpec, ExpTerm};
use hops_core::ensemble::{run_ensemble, EnsembleOptions};
use hops_core::hierarchy::build_space;
use hops_core::linalg::C64;
use hops_core::models;
use hops_core::noise::NoiseOptions;
use hops_core::observables::expectation;
use hops_core::trajectory::Variant;

fn sz(order: usize, n: u64, seed: u64) -> Vec<f64> {
    let bath = BathSpec::new(vec![ExpTerm::new(C64::new(2.0,0.0), C64::new(0.5,2.0)).unwrap()], 0.0).unwrap();
    let sys = models::spin_boson(1.0, 0.0, bath);
    let space = build_space(1, order, 1 << 16).unwrap();
    let mut opts = EnsembleOptions::new(n, seed, Variant::Nonlinear, 0.01, 10.0);
    opts.noise = NoiseOptions { omega_max_factor: 40.0, ..NoiseOptions::default() };
    let rho = run_ensemble(&sys, &space, &vec![C64::new(1.0,0.0), C64::new(0.0,0.0)], &opts).unwrap();
    expectation(&models::sigma_z(), &rho).unwrap().real_values()
}

#[test]
fn probe() {
    let n = 10_000;
    let k8a = sz(8, n, 7);
    for (k, seed) in [(4usize, 7u64), (5, 7), (6, 7), (4, 99)] {
        let kk = sz(k, n, seed);
        let reference = if seed == 7 { &k8a } else { &k8a };
        let mut sup = 0.0f64;
        let mut arg = 0.0f64;
        for (i, (a, b)) in kk.iter().zip(reference).enumerate() {
            if (a - b).abs() > sup { sup = (a - b).abs(); arg = i as f64 * 0.01; }
        }
        eprintln!("K={k} seed={seed}: sup|K - K8(seed7)| = {sup:.5} at t = {arg:.2}");
    }
}
