//! Homogeneous Landau equation in ℝ³ with interaction parameters `(α, β)`:
//! `b(x, μ) = ∫ b₀(x − αz) μ(dz)`, `σ(x, μ) = ∫ σ₀(x − βz) μ(dz)` where
//! `b₀(x) = −2|x|^γ x` and `σ₀σ₀* = a(x) = |x|^γ(|x|²I − x⊗x)`.

use serde_json::json;

use super::{CoefficientModel, ModelBounds, ModelFlags};
use crate::measure::EmpiricalMeasure;
use crate::Error;

/// `σ₀(x) = |x|^{γ/2} [[x₂, 0, x₃], [−x₁, x₃, 0], [0, −x₂, −x₁]]` (one-based
/// coordinates), row-major.
pub fn landau_sigma0(x: &[f64], gamma: f64) -> [f64; 9] {
    let s = scale(x, gamma / 2.0);
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    [
        s * x2, 0.0, s * x3, //
        -s * x1, s * x3, 0.0, //
        0.0, -s * x2, -s * x1,
    ]
}

/// `a(x) = |x|^γ (|x|² I − x ⊗ x)`, row-major.
pub fn landau_a(x: &[f64], gamma: f64) -> [f64; 9] {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s = scale(x, gamma);
    let mut a = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { r2 } else { 0.0 };
            a[i * 3 + j] = s * (delta - x[i] * x[j]);
        }
    }
    a
}

/// `b₀(x) = −2|x|^γ x`
pub fn landau_b0(x: &[f64], gamma: f64) -> [f64; 3] {
    let s = -2.0 * scale(x, gamma);
    [s * x[0], s * x[1], s * x[2]]
}

#[inline]
fn scale(x: &[f64], power: f64) -> f64 {
    if power == 0.0 {
        return 1.0;
    }
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        0.0
    } else {
        r.powf(power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandauModel {
    gamma: f64,
    alpha: f64,
    beta: f64,
    state_radius: Option<f64>,
}

impl LandauModel {
    pub fn new(gamma: f64, alpha: f64, beta: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Domain(format!("Landau exponent gamma must lie in [0, 1], got {gamma}")));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument("alpha and beta must be finite".into()));
        }
        Ok(Self { gamma, alpha, beta, state_radius: None })
    }

    pub fn with_state_radius(mut self, radius: Option<f64>) -> Result<Self, Error> {
        if let Some(r) = radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("state radius must be positive, got {r}")));
            }
        }
        self.state_radius = radius;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn maxwell(&self) -> bool {
        self.gamma == 0.0
    }
}

impl CoefficientModel for LandauModel {
    fn name(&self) -> &'static str {
        "landau"
    }

    fn dim(&self) -> usize {
        3
    }

    fn drift(&self, _t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        if self.maxwell() || self.alpha == 0.0 {
            // b₀ is linear at γ = 0, so the average commutes with it.
            let m = mu.mean();
            let y = [x[0] - self.alpha * m[0], x[1] - self.alpha * m[1], x[2] - self.alpha * m[2]];
            out.copy_from_slice(&landau_b0(&y, self.gamma));
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for z in mu.points() {
            let y = [x[0] - self.alpha * z[0], x[1] - self.alpha * z[1], x[2] - self.alpha * z[2]];
            let b = landau_b0(&y, self.gamma);
            out.iter_mut().zip(b).for_each(|(o, v)| *o += v);
        }
        let n = mu.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    fn diffusion(&self, _t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        if self.maxwell() || self.beta == 0.0 {
            let m = mu.mean();
            let y = [x[0] - self.beta * m[0], x[1] - self.beta * m[1], x[2] - self.beta * m[2]];
            out.copy_from_slice(&landau_sigma0(&y, self.gamma));
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for z in mu.points() {
            let y = [x[0] - self.beta * z[0], x[1] - self.beta * z[1], x[2] - self.beta * z[2]];
            let s = landau_sigma0(&y, self.gamma);
            out.iter_mut().zip(s).for_each(|(o, v)| *o += v);
        }
        let n = mu.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    fn flags(&self) -> ModelFlags {
        ModelFlags { additive_noise: false, invertible_sigma: false, distribution_free_sigma: self.beta == 0.0 }
    }

    fn bounds(&self) -> ModelBounds {
        let mut b = ModelBounds::empty(2.0);
        if self.maxwell() {
            let (a, be) = (self.alpha.abs(), self.beta.abs());
            b.k0 = Some(-2.0);
            b.b0 = Some(2.0);
            b.c0 = Some(2.0);
            b.grad_b_sup = Some(2.0);
            b.c1 = Some(2.0 * a + 2.0 * be * (1.0 + be));
            b.c2 = Some(2.0 - 2.0 * a - 2.0 * be);
        }
        b
    }

    fn drift_directional_derivative(
        &self,
        _t: f64,
        _x: &[f64],
        _mu: &EmpiricalMeasure,
        v: &[f64],
        out: &mut [f64],
    ) -> Result<(), Error> {
        if !self.maxwell() {
            return Err(Error::Unsupported("Landau drift derivative is only provided for gamma = 0".into()));
        }
        out.iter_mut().zip(v).for_each(|(o, vi)| *o = -2.0 * vi);
        Ok(())
    }

    fn state_radius(&self) -> Option<f64> {
        self.state_radius
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "name": self.name(),
            "dim": 3,
            "parameters": {
                "gamma": self.gamma,
                "alpha": self.alpha,
                "beta": self.beta,
                "state_radius": self.state_radius,
            },
            "schema": {
                "gamma": "real in [0, 1]",
                "alpha": "real",
                "beta": "real",
                "state_radius": "optional positive real; abort when |X| exceeds it",
            },
            "flags": self.flags(),
            "bounds": self.bounds(),
        })
    }
}
