//! Translate a parsed configuration into solver inputs.

use hops_core::bath::{
    expand_correlation, pade_coth_terms, ExpTerm, ExpandedBath, ExpansionOptions,
    LorentzPeak, SpectralDensity,
};
use hops_core::ensemble::EnsembleOptions;
use hops_core::linalg::C64;
use hops_core::models;
use hops_core::noise::NoiseOptions;
use hops_core::trajectory::{SystemSpec, Terminator, Variant};
use hops_core::{build_space, HierarchySpace};

use crate::config::{CliError, CliResult, Config};

pub fn spectral_density(cfg: &Config) -> CliResult<Option<SpectralDensity>> {
    match cfg.require("bath.variant")? {
        "none" => Ok(None),
        "direct" => {
            let terms = cfg
                .tuple_list("bath.terms", 4)?
                .iter()
                .map(|t| ExpTerm::new(C64::new(t[0], t[1]), C64::new(t[2], t[3])))
                .collect::<hops_core::Result<Vec<_>>>()?;
            Ok(Some(SpectralDensity::DirectExpansion { terms }))
        }
        "lorentzian_sum" => {
            let peaks = cfg
                .tuple_list("bath.peaks", 3)?
                .iter()
                .map(|p| LorentzPeak { weight: p[0], center: p[1], width: p[2] })
                .collect();
            Ok(Some(SpectralDensity::LorentzianSum { peaks }))
        }
        "drude_lorentz" => Ok(Some(SpectralDensity::DrudeLorentz {
            lambda: cfg.f64("bath.lambda")?,
            gamma_c: cfg.f64("bath.gamma_c")?,
        })),
        other => Err(CliError::Config(format!("bath.variant: unknown variant {other:?}"))),
    }
}

pub fn expansion_options(cfg: &Config) -> CliResult<ExpansionOptions> {
    Ok(ExpansionOptions {
        tau_max: cfg.f64("bath.tau_max")?,
        n_grid: cfg.usize("bath.n_grid")?,
        tolerance: cfg.f64("bath.tolerance")?,
    })
}

pub fn expanded_bath(cfg: &Config) -> CliResult<Option<ExpandedBath>> {
    let Some(j) = spectral_density(cfg)? else {
        return Ok(None);
    };
    let temperature = cfg.f64("bath.temperature")?;
    let scheme = pade_coth_terms(cfg.usize("bath.n_pade")?)?;
    Ok(Some(expand_correlation(&j, temperature, &scheme, &expansion_options(cfg)?)?))
}

pub struct BuiltSystem {
    pub sys: SystemSpec,
    pub dipoles: Option<Vec<f64>>,
    pub bath_error: f64,
}

pub fn system(cfg: &Config) -> CliResult<BuiltSystem> {
    let mut built = system_unshifted(cfg)?;
    // a uniform energy offset is a global phase: observables are invariant,
    // but removing it keeps the explicit stepper far from its stability edge
    let shift = cfg.f64("system.energy_shift")?;
    if shift != 0.0 {
        let d = built.sys.h.dim();
        built.sys.h = built
            .sys
            .h
            .sub(&hops_core::linalg::Op::identity(d).scaled(C64::new(shift, 0.0)));
    }
    Ok(built)
}

fn system_unshifted(cfg: &Config) -> CliResult<BuiltSystem> {
    let model = cfg.require("system.model")?;
    match model {
        "spin_boson" => {
            let bath = expanded_bath(cfg)?
                .ok_or_else(|| CliError::Config("spin_boson requires a bath".into()))?;
            let sys = models::spin_boson(
                cfg.f64("system.delta")?,
                cfg.f64("system.epsilon")?,
                bath.bath.clone(),
            );
            Ok(BuiltSystem { sys, dipoles: None, bath_error: bath.max_rel_error })
        }
        "linear_chain" => {
            let expanded = expanded_bath(cfg)?;
            let (bath, err) = match expanded {
                Some(e) => (Some(e.bath), e.max_rel_error),
                None => (None, 0.0),
            };
            let mu = cfg.f64("system.dipole")?;
            let (sys, dipoles) = models::linear_chain(
                cfg.usize("system.n_sites")?,
                cfg.f64("system.site_energy")?,
                cfg.f64("system.coupling")?,
                bath,
                mu,
            )?;
            Ok(BuiltSystem { sys, dipoles: Some(dipoles), bath_error: err })
        }
        "fmo" => {
            let path = cfg.require("system.file")?;
            let sys = models::fmo_from_file(path)?;
            Ok(BuiltSystem { sys, dipoles: None, bath_error: 0.0 })
        }
        other => Err(CliError::Config(format!("system.model: unknown model {other:?}"))),
    }
}

pub fn initial_state(cfg: &Config, dim: usize) -> CliResult<Vec<C64>> {
    let site = cfg.usize("system.initial_site")?;
    if site >= dim {
        return Err(CliError::Config(format!(
            "system.initial_site = {site} out of range for dimension {dim}"
        )));
    }
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[site] = C64::new(1.0, 0.0);
    Ok(psi)
}

pub fn terminator(cfg: &Config) -> CliResult<Terminator> {
    match cfg.require("hierarchy.terminator")? {
        "rescaled" => Ok(Terminator::Rescaled),
        "zero" => Ok(Terminator::Zero),
        other => Err(CliError::Config(format!(
            "hierarchy.terminator: expected rescaled or zero, got {other:?}"
        ))),
    }
}

pub fn variant(cfg: &Config) -> CliResult<Variant> {
    match cfg.require("variant")? {
        "linear" => Ok(Variant::Linear),
        "nonlinear" => Ok(Variant::Nonlinear),
        other => Err(CliError::Config(format!(
            "variant: expected linear or nonlinear, got {other:?}"
        ))),
    }
}

pub fn noise_options(cfg: &Config) -> CliResult<NoiseOptions> {
    Ok(NoiseOptions {
        omega_max_factor: cfg.f64("noise.omega_max_factor")?,
        clip_tol: cfg.f64("noise.clip_tol")?,
        ..NoiseOptions::default()
    })
}

pub fn space_for(cfg: &Config, sys: &SystemSpec, order: usize) -> CliResult<HierarchySpace> {
    Ok(build_space(sys.n_modes(), order, cfg.usize("hierarchy.max_indices")?)?)
}

pub fn ensemble_options(cfg: &Config) -> CliResult<EnsembleOptions> {
    let n_traj = cfg.u64("ensemble.n_traj")?;
    if n_traj == 0 {
        return Err(CliError::Config("ensemble.n_traj must be at least 1".into()));
    }
    let mut opts = EnsembleOptions::new(
        n_traj,
        cfg.u64("ensemble.seed")?,
        variant(cfg)?,
        cfg.f64("integrator.dt")?,
        cfg.f64("integrator.t_max")?,
    );
    opts.terminator = terminator(cfg)?;
    opts.workers = cfg.usize("ensemble.workers")?;
    opts.abort_tolerance = cfg.f64("ensemble.abort_tolerance")?;
    opts.noise = noise_options(cfg)?;
    Ok(opts)
}
