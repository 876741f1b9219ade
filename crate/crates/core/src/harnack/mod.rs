//! Coupling by change of measure and the Harnack-type estimates it yields.
//!
//! The coupled process `Y` carries the extra drift
//! `σ(Y)σ(X)⁻¹(X − Y)/ξ_t`, which forces `X_T = Y_T`; the Girsanov weight
//! `R_T` turns expectations under `Y`'s law into weighted expectations under
//! `X`'s. Models with degenerate or law-dependent diffusion are refused.

mod bounds;
mod coupling;
mod shift;

use serde::{Deserialize, Serialize};

pub use bounds::{density_bound_rhs, entropy_bound, power_harnack_constant, power_threshold, total_variation_bound, DensityBound};
pub use coupling::{coupled_girsanov, pair_initials, verify_log_harnack, CouplingOptions, CouplingResult, CouplingRun, HarnackCheck};
pub use shift::{integration_by_parts_check, shift_coupling_verify, shift_harnack_integral, IbpCheck, ShiftHarnackCheck, ShiftOptions};

use crate::models::{CoefficientModel, ModelBounds};
use crate::Error;

/// Constants driving the coupling on `[s, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub horizon: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda: f64,
    /// Needed only by the power-Harnack constant.
    pub gamma_t: Option<f64>,
    /// Pairs with `|log R_T|` above this are counted (not altered).
    pub weight_clip: Option<f64>,
}

impl CouplingConfig {
    pub fn from_bounds(bounds: &ModelBounds, horizon: f64) -> Result<Self, Error> {
        let missing = |what: &str| Error::Unsupported(format!("model does not declare {what}"));
        let cfg = Self {
            horizon,
            kappa1: bounds.kappa1.ok_or_else(|| missing("kappa1"))?,
            kappa2: bounds.kappa2.ok_or_else(|| missing("kappa2"))?,
            lambda: bounds.lambda.ok_or_else(|| missing("lambda (no invertible diffusion)"))?,
            gamma_t: bounds.gamma_t,
            weight_clip: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("coupling horizon must be positive, got {}", self.horizon)));
        }
        if !(self.kappa1 >= 0.0) || !(self.kappa2 >= 0.0) || !(self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coupling constants need kappa1, kappa2 >= 0 and lambda > 0, got {}, {}, {}",
                self.kappa1, self.kappa2, self.lambda
            )));
        }
        Ok(())
    }

    pub fn xi(&self, t: f64) -> f64 {
        xi_schedule(self.horizon, self.kappa1, t)
    }

    pub fn phi(&self, s: f64, t: f64) -> Result<f64, Error> {
        phi(s, t, self.lambda, self.kappa1, self.kappa2)
    }
}

/// `ξ_t = (1 − e^{κ₁(t−T)})/κ₁`, and `T − t` at `κ₁ = 0`.
pub fn xi_schedule(horizon: f64, kappa1: f64, t: f64) -> f64 {
    if kappa1 == 0.0 {
        horizon - t
    } else {
        -(kappa1 * (t - horizon)).exp_m1() / kappa1
    }
}

/// `φ(s,t) = λ²(κ₁/(1 − e^{−κ₁(t−s)}) + t κ₂² e^{2(t−s)(κ₁+κ₂)}/2)`, with
/// the first term replaced by `1/(t−s)` at `κ₁ = 0`.
pub fn phi(s: f64, t: f64, lambda: f64, kappa1: f64, kappa2: f64) -> Result<f64, Error> {
    if !(t > s) {
        return Err(Error::Domain(format!("phi needs t > s, got s = {s}, t = {t}")));
    }
    let tau = t - s;
    let first = if kappa1 == 0.0 { 1.0 / tau } else { kappa1 / -(-kappa1 * tau).exp_m1() };
    let second = t * kappa2 * kappa2 * (2.0 * tau * (kappa1 + kappa2)).exp() / 2.0;
    Ok(lambda * lambda * (first + second))
}

pub(crate) fn require_harnack_model(model: &dyn CoefficientModel) -> Result<(), Error> {
    let flags = model.flags();
    if !flags.invertible_sigma || !flags.distribution_free_sigma {
        return Err(Error::Unsupported(format!(
            "{} needs an invertible diffusion that does not depend on the law",
            model.name()
        )));
    }
    Ok(())
}
