use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::measure::{wasserstein, EmpiricalMeasure, Method};
use crate::models::CoefficientModel;
use crate::rng::NoiseSpec;
use crate::Error;

use super::particle::{evolve_particles, initial_particles};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantOptions {
    pub dt: f64,
    pub n_particles: usize,
    pub burn_in: f64,
    pub check_horizon: f64,
    pub tol: f64,
    pub theta: f64,
    /// How many times the burn-in may double before giving up.
    pub max_doublings: usize,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self { dt: 1e-3, n_particles: 2000, burn_in: 10.0, check_horizon: 0.5, tol: 0.05, theta: 2.0, max_doublings: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    /// The snapshot `μ̂` after the final burn-in.
    pub measure: EmpiricalMeasure,
    /// `W_θ(μ̂, P*_check μ̂)` for the final burn-in.
    pub residual: f64,
    pub burn_ins: Vec<f64>,
    pub residuals: Vec<f64>,
    pub success: bool,
}

impl InvariantReport {
    /// Per-coordinate second moments of `μ̂`.
    pub fn coordinate_second_moments(&self) -> Vec<f64> {
        let d = self.measure.dim();
        let mut acc = vec![0.0; d];
        for p in self.measure.points() {
            acc.iter_mut().zip(p).for_each(|(a, v)| *a += v * v);
        }
        acc.iter().map(|a| a / self.measure.len() as f64).collect()
    }
}

/// Evolve the particle system from `mu0` for the burn-in, then compare the
/// snapshot with its own evolution over `check_horizon`. The burn-in doubles
/// while the residual exceeds `tol`.
pub fn find_invariant(
    model: &dyn CoefficientModel,
    mu0: &EmpiricalMeasure,
    noise: &NoiseSpec,
    opts: &InvariantOptions,
) -> Result<InvariantReport, Error> {
    let bounds = model.bounds();
    if !model.time_homogeneous() {
        return Err(Error::Unsupported("invariant measures need a time-homogeneous model".into()));
    }
    if !bounds.dissipative() {
        return Err(Error::NotDissipative { c1: bounds.c1.unwrap_or(f64::NAN), c2: bounds.c2.unwrap_or(f64::NAN) });
    }
    if !(opts.tol > 0.0) || !(opts.burn_in > 0.0) || !(opts.check_horizon > 0.0) {
        return Err(Error::InvalidArgument("burn_in, check_horizon and tol must be positive".into()));
    }
    let mut state = initial_particles(mu0, opts.n_particles);
    let mut elapsed = 0.0;
    let mut step_offset = 0u64;
    let mut target = opts.burn_in;
    let mut burn_ins = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let method = Method::Auto;
    loop {
        let mut leg = TimeGrid::with_step(elapsed, target, opts.dt)?;
        leg.step_offset = step_offset;
        state = evolve_particles(model, &state, &leg, noise)?;
        step_offset += leg.n_steps as u64;
        elapsed = target;

        let mut check = TimeGrid::with_step(elapsed, elapsed + opts.check_horizon, opts.dt)?;
        check.step_offset = step_offset;
        let evolved = evolve_particles(model, &state, &check, noise)?;
        let residual = wasserstein(&state, &evolved, opts.theta, method)?;
        burn_ins.push(elapsed);
        if residual <= opts.tol {
            residuals.push(residual);
            return Ok(InvariantReport { measure: state, residual, burn_ins, residuals, success: true });
        }
        let stalled = residuals.last().is_some_and(|&prev| residual >= prev);
        residuals.push(residual);
        if stalled || residuals.len() > opts.max_doublings {
            return Err(Error::InvariantNonConvergence { residuals });
        }
        target *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LandauModel, LinearMeanField};
    use crate::stats::Estimate;

    #[test]
    fn ou_stationary_variance() {
        let model = LinearMeanField::isotropic(1.0, 0.0, 1.0, 1).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[3.0]).unwrap();
        let opts = InvariantOptions { n_particles: 1000, burn_in: 5.0, dt: 2e-3, tol: 0.1, ..Default::default() };
        let r = find_invariant(&model, &mu0, &NoiseSpec::new(21, 1), &opts).unwrap();
        assert!(r.success);
        let sq: Vec<f64> = r.measure.as_flat().iter().map(|v| v * v).collect();
        let e = Estimate::from_samples(&sq);
        assert!((e.mean - 0.5).abs() < 3.0 * e.se + 0.01, "{} ± {}", e.mean, e.se);
    }

    #[test]
    fn deterministic_contraction_collapses_to_a_point() {
        let model = LinearMeanField::isotropic(1.0, 0.0, 0.0, 2).unwrap();
        let mu0 = EmpiricalMeasure::new(2, (0..40).map(|i| i as f64 / 10.0).collect()).unwrap();
        let opts = InvariantOptions { n_particles: 20, burn_in: 20.0, dt: 1e-2, tol: 1e-6, ..Default::default() };
        let r = find_invariant(&model, &mu0, &NoiseSpec::new(0, 2), &opts).unwrap();
        assert!(r.measure.moment(2.0) < 1e-12);
    }

    #[test]
    fn landau_weak_interaction_is_dissipative() {
        let model = LandauModel::new(0.0, 0.1, 0.0).unwrap();
        let mut pts = vec![0.0; 3 * 256];
        NoiseSpec::new(5, 3).fill_standard_normal(0, 0, &mut pts);
        let mu0 = EmpiricalMeasure::new(3, pts).unwrap();
        let opts = InvariantOptions { n_particles: 256, burn_in: 3.0, dt: 5e-3, tol: 0.5, ..Default::default() };
        let r = find_invariant(&model, &mu0, &NoiseSpec::new(6, 3), &opts).unwrap();
        assert!(r.success, "residual {}", r.residual);
    }

    #[test]
    fn refuses_non_dissipative_models() {
        let model = LandauModel::new(0.0, 1.0, 1.0).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[0.0; 3]).unwrap();
        let err = find_invariant(&model, &mu0, &NoiseSpec::new(0, 3), &InvariantOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotDissipative { .. }));
    }
}
