//! Simulation and numerical verification for distribution-dependent
//! (McKean–Vlasov) SDEs
//! `dX_t = b_t(X_t, Law(X_t)) dt + σ_t(X_t, Law(X_t)) dW_t`.
//!
//! Layers, bottom up:
//! - [`rng`], [`grid`], [`sde`]: counter-based noise and Euler–Maruyama stepping
//!   against a frozen law curve;
//! - [`measure`]: empirical measures and Wasserstein distances;
//! - [`models`]: the homogeneous Landau family and a linear mean-field model,
//!   with their analytic constants;
//! - [`solver`]: Picard iteration in law, the interacting particle system,
//!   contraction and invariant-measure estimation;
//! - [`harnack`]: coupling by change of measure, Harnack and
//!   integration-by-parts checks, bound calculators;
//! - [`experiment`]: JSON-configured batch runs used by the `ddsde` binary.

pub mod experiment;
pub mod functions;
pub mod grid;
pub mod harnack;
pub mod measure;
pub mod models;
pub mod rng;
pub mod sde;
pub mod solver;
pub mod stats;

pub use grid::TimeGrid;
pub use measure::{wasserstein, EmpiricalMeasure, Method};
pub use models::{CoefficientModel, LandauModel, LinearMeanField, ModelBounds, ModelFlags};
pub use rng::NoiseSpec;
pub use sde::PathEnsemble;
pub use solver::LawCurve;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exact transport needs equal sizes, got {left} and {right} points")]
    UnequalSizes { left: usize, right: usize },
    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFinite { trajectory: usize, step: usize },
    #[error("trajectory {trajectory} left the ball of radius {radius} at step {step}")]
    RadiusExceeded { trajectory: usize, step: usize, radius: f64 },
    #[error("diffusion matrix is singular at step {step} (trajectory {trajectory})")]
    SingularDiffusion { trajectory: usize, step: usize },
    #[error("Picard iteration diverges; deltas {deltas:?}")]
    PicardDivergence { deltas: Vec<f64> },
    #[error("model is not dissipative: C1 = {c1}, C2 = {c2}")]
    NotDissipative { c1: f64, c2: f64 },
    #[error("invariant-measure search did not converge; residuals {residuals:?}")]
    InvariantNonConvergence { residuals: Vec<f64> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors raised by the numerics themselves (as opposed to bad input).
    pub fn is_numerical_abort(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::RadiusExceeded { .. }
                | Error::SingularDiffusion { .. }
                | Error::PicardDivergence { .. }
                | Error::InvariantNonConvergence { .. }
        )
    }
}
