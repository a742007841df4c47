//! Stochastic pure-state hierarchy solver for open quantum system dynamics.
//!
//! The reduced density operator of a system coupled to structured harmonic
//! environments is reconstructed as an ensemble average over stochastic
//! pure-state trajectories. Each trajectory propagates a hierarchy of
//! auxiliary states driven by a colored complex Gaussian process whose
//! covariance is the bath correlation function. Both the linear unraveling
//! and the normalized (nonlinear) variant are provided, together with
//! multi-exponential bath expansions at zero and finite temperature,
//! deterministic absorption spectra, and small-scale exact reference
//! solvers for validation.

pub mod bath;
pub mod ensemble;
pub mod hierarchy;
pub mod linalg;
pub mod models;
pub mod noise;
pub mod observables;
pub mod quad;
pub mod reference;
pub mod trajectory;

pub use bath::{BathSpec, ExpTerm, PadeScheme, SpectralDensity};
pub use ensemble::{run_ensemble, run_ensemble_sequential, DensityTrajectory, EnsembleAccumulator};
pub use hierarchy::{build_space, HierarchySpace};
pub use linalg::{Op, C64};
pub use trajectory::{
    integrate_trajectory, Coupling, SystemSpec, Terminator, Trajectory, Variant,
};

/// Error type shared by all solver components.
#[derive(Debug, thiserror::Error)]
pub enum HopsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("expansion validation failed: max relative error {achieved:.3e} exceeds tolerance {tolerance:.3e}")]
    Validation { achieved: f64, tolerance: f64 },
    #[error("hierarchy budget exceeded: {needed} auxiliary states requested, budget is {budget}")]
    Budget { needed: u128, budget: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },
    #[error("trajectory aborted: {0}")]
    Trajectory(String),
}

pub type Result<T> = std::result::Result<T, HopsError>;
