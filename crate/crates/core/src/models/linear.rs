//! `b(x, μ) = −a x + c · mean(μ)` with constant diffusion σ.
//!
//! The mean solves `m′ = (c − a) m` and for `c = 0` the model is an
//! Ornstein–Uhlenbeck process, which gives closed-form oracles.

use nalgebra::DMatrix;
use serde_json::json;

use super::{CoefficientModel, ModelBounds, ModelFlags};
use crate::measure::EmpiricalMeasure;
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeanField {
    a: f64,
    c: f64,
    dim: usize,
    sigma: Vec<f64>,
    sigma_inv: Option<Vec<f64>>,
    sigma_min: f64,
}

impl LinearMeanField {
    pub fn new(a: f64, c: f64, sigma: DMatrix<f64>) -> Result<Self, Error> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "sigma must be a nonempty square matrix, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !a.is_finite() || !c.is_finite() || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("linear model parameters must be finite".into()));
        }
        let dim = sigma.nrows();
        let rows: Vec<f64> = sigma.transpose().as_slice().to_vec();
        let sigma_min = sigma.clone().svd(false, false).singular_values.min();
        let sigma_inv = if sigma_min > 0.0 { super::invert(&rows, dim) } else { None };
        Ok(Self { a, c, dim, sigma: rows, sigma_inv, sigma_min })
    }

    pub fn from_rows(a: f64, c: f64, rows: &[Vec<f64>]) -> Result<Self, Error> {
        let d = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: r.len() });
        }
        Self::new(a, c, DMatrix::from_row_iterator(d, d, rows.iter().flatten().copied()))
    }

    /// `σ = s · I_d`
    pub fn isotropic(a: f64, c: f64, s: f64, dim: usize) -> Result<Self, Error> {
        Self::new(a, c, DMatrix::identity(dim, dim) * s)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Row-major σ.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_inverse(&self) -> Option<&[f64]> {
        self.sigma_inv.as_deref()
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.sigma.chunks(self.dim).map(|r| r.to_vec()).collect()
    }
}

impl CoefficientModel for LinearMeanField {
    fn name(&self) -> &'static str {
        "linear_meanfield"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, _t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        let m = mu.mean();
        for i in 0..self.dim {
            out[i] = -self.a * x[i] + self.c * m[i];
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure, out: &mut [f64]) {
        out.copy_from_slice(&self.sigma);
    }

    fn flags(&self) -> ModelFlags {
        ModelFlags { additive_noise: true, invertible_sigma: self.sigma_inv.is_some(), distribution_free_sigma: true }
    }

    fn bounds(&self) -> ModelBounds {
        let kappa1 = (-2.0 * self.a).max(0.0);
        let kappa2 = 2.0 * self.c.abs();
        let mut b = ModelBounds::empty(2.0);
        b.kappa1 = Some(kappa1);
        b.kappa2 = Some(kappa2);
        b.lambda = self.sigma_inv.as_ref().map(|_| 1.0 / self.sigma_min);
        b.gamma_t = Some(0.0);
        b.c1 = Some(self.c.abs());
        b.c2 = Some(2.0 * self.a - self.c.abs());
        b.lipschitz_rate = Some(kappa1 + kappa2);
        b.grad_b_sup = Some(self.a.abs());
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
        out.iter_mut().zip(v).for_each(|(o, vi)| *o = -self.a * vi);
        Ok(())
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "name": self.name(),
            "dim": self.dim,
            "parameters": { "a": self.a, "c": self.c, "sigma": self.sigma_rows() },
            "schema": {
                "a": "real, confinement rate",
                "c": "real, mean-field coupling",
                "sigma": "d x d real matrix (rows); fixes the dimension",
            },
            "flags": self.flags(),
            "bounds": self.bounds(),
        })
    }
}
