//! Coefficient sets `(b_t(x, μ), σ_t(x, μ))` and their analytic constants.

mod landau;
mod linear;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use landau::{landau_a, landau_b0, landau_sigma0, LandauModel};
pub use linear::LinearMeanField;

use crate::measure::EmpiricalMeasure;
use crate::Error;

/// Structural properties of the diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFlags {
    /// σ depends on neither x nor μ.
    pub additive_noise: bool,
    /// σ is invertible everywhere.
    pub invertible_sigma: bool,
    /// σ does not depend on μ.
    pub distribution_free_sigma: bool,
}

/// Analytic constants declared by a model. `None` marks a constant that is
/// not available for the model (e.g. `λ` when σ is degenerate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBounds {
    pub theta: f64,
    /// Monotonicity constants of
    /// `2⟨b(x,μ)−b(y,ν), x−y⟩ + ‖σ(x)−σ(y)‖²_HS ≤ κ₁|x−y|² + κ₂|x−y| W₂(μ,ν)`.
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    /// `‖σ⁻¹‖ ≤ λ`
    pub lambda: Option<f64>,
    /// `|(σ(x)−σ(y))*(x−y)| ≤ γ|x−y|`
    pub gamma_t: Option<f64>,
    /// `2⟨b(x,μ)−b(y,ν), x−y⟩ + ‖σ(x,μ)−σ(y,ν)‖²_HS ≤ C₁W₂(μ,ν)² − C₂|x−y|²`
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Growth exponent used for the W_θ-Lipschitz flow check, taken as `κ₁ + κ₂`.
    pub lipschitz_rate: Option<f64>,
    /// `sup ‖∇_x b‖`
    pub grad_b_sup: Option<f64>,
    pub k0: Option<f64>,
    pub b0: Option<f64>,
    pub c0: Option<f64>,
}

impl ModelBounds {
    pub fn empty(theta: f64) -> Self {
        Self {
            theta,
            kappa1: None,
            kappa2: None,
            lambda: None,
            gamma_t: None,
            c1: None,
            c2: None,
            lipschitz_rate: None,
            grad_b_sup: None,
            k0: None,
            b0: None,
            c0: None,
        }
    }

    /// `C₂ > C₁`
    pub fn dissipative(&self) -> bool {
        matches!((self.c1, self.c2), (Some(c1), Some(c2)) if c2 > c1)
    }

    /// Exponent `C₁ − C₂` of the synchronous-coupling envelope for `W₂²`.
    pub fn contraction_rate(&self) -> Option<f64> {
        Some(self.c1? - self.c2?)
    }
}

/// Drift and diffusion of a distribution-dependent SDE on ℝ^d.
///
/// Diffusion matrices are `d × d`, row-major, driven by d-dimensional noise.
pub trait CoefficientModel: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);

    fn diffusion(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);

    fn flags(&self) -> ModelFlags;

    fn bounds(&self) -> ModelBounds;

    /// `∇_v b_t(·, μ)(x)`, the x-derivative with μ held fixed.
    fn drift_directional_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _mu: &EmpiricalMeasure,
        _v: &[f64],
        _out: &mut [f64],
    ) -> Result<(), Error> {
        Err(Error::Unsupported(format!("{} does not provide a drift derivative", self.name())))
    }

    /// Abort a simulation once a state leaves this ball.
    fn state_radius(&self) -> Option<f64> {
        None
    }

    fn time_homogeneous(&self) -> bool {
        true
    }

    /// Parameters, flags and bounds as JSON.
    fn describe(&self) -> serde_json::Value;
}

/// Model selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Landau {
        gamma: f64,
        alpha: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state_radius: Option<f64>,
    },
    LinearMeanfield {
        a: f64,
        c: f64,
        /// `d × d` rows; its size fixes the dimension.
        sigma: Vec<Vec<f64>>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn CoefficientModel>, Error> {
        Ok(match self {
            ModelSpec::Landau { gamma, alpha, beta, state_radius } => {
                Box::new(LandauModel::new(*gamma, *alpha, *beta)?.with_state_radius(*state_radius)?)
            }
            ModelSpec::LinearMeanfield { a, c, sigma } => Box::new(LinearMeanField::from_rows(*a, *c, sigma)?),
        })
    }
}

/// Names accepted by [`describe`] and in configuration files.
pub fn list_models() -> &'static [&'static str] {
    &["landau", "linear_meanfield"]
}

/// Parameter schema plus the bounds of a default instance.
pub fn describe(name: &str) -> Result<serde_json::Value, Error> {
    let model: Box<dyn CoefficientModel> = match name {
        "landau" => Box::new(LandauModel::new(0.0, 1.0, 1.0)?),
        "linear_meanfield" => Box::new(LinearMeanField::new(1.0, 0.0, DMatrix::identity(3, 3))?),
        other => {
            let hint = list_models()
                .iter()
                .max_by(|a, b| strsim::jaro_winkler(a, other).total_cmp(&strsim::jaro_winkler(b, other)))
                .map(|s| format!("; did you mean `{s}`?"))
                .unwrap_or_default();
            return Err(Error::Config(format!("unknown model `{other}`{hint}")));
        }
    };
    Ok(model.describe())
}

/// Growth exponent of `W₂²` under synchronous coupling for the Landau
/// Maxwell-molecule model with interaction parameters `(α, β)`.
pub fn contraction_exponent_cc(alpha: f64, beta: f64) -> f64 {
    4.0 * (alpha.abs() + beta.abs()) + 2.0 * beta * beta - 2.0
}

/// The same exponent for a general `b₀, σ₀` with constants `K₀, B₀, C₀`.
pub fn contraction_exponent_tn(k0: f64, b0: f64, c0: f64, alpha: f64, beta: f64) -> f64 {
    let s = 1.0 + beta.abs();
    2.0 * k0 + c0 * s * s + 2.0 * alpha.abs() * b0
}

/// Inverse of a row-major `d × d` matrix, `None` when singular.
pub fn invert(matrix: &[f64], d: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(d, d, matrix);
    let inv = m.try_inverse()?;
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv.transpose().as_slice().to_vec())
    } else {
        None
    }
}

/// `y = A x` for row-major `A`.
#[inline]
pub fn mat_vec(a: &[f64], x: &[f64], y: &mut [f64]) {
    let d = x.len();
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = a[i * d..(i + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_formulas() {
        assert_eq!(contraction_exponent_cc(1.0, 1.0), 8.0);
        assert_eq!(contraction_exponent_cc(0.0, 0.0), -2.0);
        assert_eq!(contraction_exponent_tn(-2.0, 2.0, 2.0, 1.0, 1.0), 8.0);
        assert_eq!(contraction_exponent_tn(-2.0, 2.0, 2.0, 0.0, 0.0), -2.0);
        assert_eq!(contraction_exponent_tn(0.0, 0.0, 0.0, 0.7, -0.3), 0.0);
        // the two agree for all (α, β) at the Maxwell constants
        for (a, b) in [(0.1, 0.0), (-0.4, 0.25), (2.0, -1.5)] {
            let tn = contraction_exponent_tn(-2.0, 2.0, 2.0, a, b);
            assert!((contraction_exponent_cc(a, b) - tn).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_round_trip_and_unknown_keys() {
        let s = r#"{"name":"landau","gamma":0.0,"alpha":1.0,"beta":1.0}"#;
        let spec: ModelSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec, ModelSpec::Landau { gamma: 0.0, alpha: 1.0, beta: 1.0, state_radius: None });
        assert_eq!(serde_json::to_string(&spec).unwrap(), s);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"name":"landau","gamma":0.0,"alpha":1.0,"beta":1.0,"x":1}"#).is_err());
        assert!(serde_json::from_str::<ModelSpec>(r#"{"name":"boltzmann"}"#).is_err());
        let lin: ModelSpec = serde_json::from_str(r#"{"name":"linear_meanfield","a":1,"c":0,"sigma":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(lin.build().unwrap().dim(), 2);
    }

    #[test]
    fn describe_known_and_unknown() {
        let d = describe("landau").unwrap();
        assert_eq!(d["bounds"]["k0"], -2.0);
        assert_eq!(d["bounds"]["b0"], 2.0);
        assert_eq!(d["bounds"]["c0"], 2.0);
        assert_eq!(d["flags"]["invertible_sigma"], false);
        let l = describe("linear_meanfield").unwrap();
        assert_eq!(l["flags"]["additive_noise"], true);
        let err = describe("landua").unwrap_err().to_string();
        assert!(err.contains("did you mean `landau`"), "{err}");
    }

    #[test]
    fn inverse_round_trip() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0];
        let inv = invert(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
