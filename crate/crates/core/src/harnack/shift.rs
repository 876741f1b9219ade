use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::functions::{dot, TestFunction};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::models::{invert, mat_vec, CoefficientModel};
use crate::rng::NoiseSpec;
use crate::sde::{check_dims, em_step, euler_terminal, Scratch};
use crate::solver::{initial_particles, particle_solve, LawCurve};
use crate::stats::Estimate;
use crate::Error;

const LAW_TAG: u64 = 0x5348_4946_54;
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftOptions {
    /// Trajectories in the Monte Carlo averages.
    pub n_paths: usize,
    /// Particles in the run producing `μ_t`.
    pub law_particles: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self { n_paths: 10_000, law_particles: 2000 }
    }
}

/// `λ² ∫_0^τ (1 + rG)² dr` for constant `‖σ⁻¹‖ ≤ λ` and `‖∇b‖ ≤ G`.
pub fn shift_harnack_integral(lambda: f64, grad_b: f64, tau: f64) -> f64 {
    lambda * lambda * (tau + grad_b * tau * tau + grad_b * grad_b * tau.powi(3) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftHarnackCheck {
    pub p: f64,
    /// Multiplicative constant on the right of the power inequality.
    pub constant: f64,
    /// `(mean f(X_T))^p`
    pub lhs: f64,
    /// `constant · mean f(X_T + v)^p`
    pub rhs: f64,
    pub slack: f64,
    pub slack_se: f64,
    /// `mean log f(X_T)`, present for positive `f`.
    pub log_lhs: Option<f64>,
    /// `log mean f(X_T + v) + |v|² I / (2τ²)`
    pub log_rhs: Option<f64>,
    pub log_slack: Option<f64>,
    pub log_slack_se: Option<f64>,
    pub violated: bool,
}

fn additive_setup(
    model: &dyn CoefficientModel,
    mu0: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    law_particles: usize,
) -> Result<(LawCurve, Vec<f64>), Error> {
    let flags = model.flags();
    if !flags.additive_noise || !flags.invertible_sigma {
        return Err(Error::Unsupported(format!("{} needs additive invertible noise", model.name())));
    }
    check_dims(model, mu0, noise)?;
    let d = model.dim();
    let (law, _) = particle_solve(model, mu0, grid, &noise.derive(LAW_TAG), law_particles.max(2))?;
    let mut sigma = vec![0.0; d * d];
    model.diffusion(grid.start, mu0.point(0), law.at(0), &mut sigma);
    let inv = invert(&sigma, d).ok_or(Error::SingularDiffusion { trajectory: 0, step: 0 })?;
    Ok((law, inv))
}

/// Monte Carlo check of the shift Harnack inequality
/// `(P f)^p(μ₀) ≤ P f^p(v+·)(μ₀) · exp[p|v|² I / (2(p−1)τ²)]` and of its log form.
#[allow(clippy::too_many_arguments)]
pub fn shift_coupling_verify(
    model: &dyn CoefficientModel,
    f: &TestFunction,
    v: &[f64],
    mu0: &EmpiricalMeasure,
    p: f64,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    opts: &ShiftOptions,
) -> Result<ShiftHarnackCheck, Error> {
    f.validate(model.dim())?;
    if v.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: v.len() });
    }
    if !(p > 1.0) {
        return Err(Error::Domain(format!("shift Harnack needs p > 1, got {p}")));
    }
    let bounds = model.bounds();
    let lambda = bounds.lambda.ok_or_else(|| Error::Unsupported("model does not declare lambda".into()))?;
    let grad_b = bounds.grad_b_sup.ok_or_else(|| Error::Unsupported("model does not declare sup |grad b|".into()))?;
    let (law, _) = additive_setup(model, mu0, grid, noise, opts.law_particles)?;
    let init = initial_particles(mu0, opts.n_paths);
    let terminal = euler_terminal(model, &law, &init, grid, noise)?;

    let tau = grid.end() - grid.start;
    let integral = shift_harnack_integral(lambda, grad_b, tau);
    let v_sq = dot(v, v);
    let constant = (p * v_sq * integral / (2.0 * (p - 1.0) * tau * tau)).exp();

    let mut shifted = vec![0.0; v.len()];
    let mut vals = Vec::with_capacity(terminal.len());
    let mut vals_v = Vec::with_capacity(terminal.len());
    for x in terminal.points() {
        shifted.iter_mut().zip(x.iter().zip(v)).for_each(|(s, (a, b))| *s = a + b);
        vals.push(f.value(x));
        vals_v.push(f.value(&shifted));
    }
    let fbar = vals.iter().sum::<f64>() / vals.len() as f64;
    let pow_v: Vec<f64> = vals_v.iter().map(|y| y.powf(p)).collect();
    let pbar = pow_v.iter().sum::<f64>() / pow_v.len() as f64;
    let lhs = fbar.powf(p);
    let rhs = constant * pbar;
    let lin: Vec<f64> = pow_v.iter().zip(&vals).map(|(y, x)| constant * y - p * fbar.powf(p - 1.0) * x).collect();
    let slack_se = Estimate::from_samples(&lin).se;
    let slack = rhs - lhs;

    let (mut log_lhs, mut log_rhs, mut log_slack, mut log_slack_se) = (None, None, None, None);
    if f.is_positive() {
        let logs: Vec<f64> = terminal.points().map(|x| f.log_value(x)).collect();
        let vbar = vals_v.iter().sum::<f64>() / vals_v.len() as f64;
        let l = logs.iter().sum::<f64>() / logs.len() as f64;
        let r = vbar.ln() + v_sq * integral / (2.0 * tau * tau);
        let lin: Vec<f64> = vals_v.iter().zip(&logs).map(|(y, lf)| y / vbar - lf).collect();
        log_lhs = Some(l);
        log_rhs = Some(r);
        log_slack = Some(r - l);
        log_slack_se = Some(Estimate::from_samples(&lin).se);
    }
    let violated = slack < -3.0 * slack_se
        || matches!((log_slack, log_slack_se), (Some(s), Some(se)) if s < -3.0 * se);
    Ok(ShiftHarnackCheck {
        p,
        constant,
        lhs,
        rhs,
        slack,
        slack_se,
        log_lhs,
        log_rhs,
        log_slack,
        log_slack_se,
        violated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpCheck {
    /// `mean ∇_v f(X_T)`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `mean f(X_T) N`
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of the per-path difference.
    pub diff_se: f64,
    pub z_score: f64,
    /// `⟨u, v⟩` when `f` is linear.
    pub lhs_exact: Option<f64>,
}

/// Compare `E ∇_v f(X_T)` with `E[f(X_T) N]`,
/// `N = (1/τ) Σ_k ⟨σ⁻¹(v − (t_k − s)∇_v b(X_k, μ_k)), ΔW_k⟩`.
#[allow(clippy::too_many_arguments)]
pub fn integration_by_parts_check(
    model: &dyn CoefficientModel,
    f: &TestFunction,
    v: &[f64],
    mu0: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    opts: &ShiftOptions,
) -> Result<IbpCheck, Error> {
    let d = model.dim();
    f.validate(d)?;
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    let (law, inv) = additive_setup(model, mu0, grid, noise, opts.law_particles)?;
    let init = initial_particles(mu0, opts.n_paths);
    let m = init.len();
    let tau = grid.end() - grid.start;
    let sq = grid.dt.sqrt();
    let radius = model.state_radius();

    let per_chunk = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<(f64, f64, f64)>, Error> {
            let mut scratch = Scratch::new(d);
            let (mut x, mut next) = (vec![0.0; d], vec![0.0; d]);
            let (mut grad, mut w, mut sw) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let range = c * CHUNK..((c + 1) * CHUNK).min(m);
            let mut out = Vec::with_capacity(range.len());
            for i in range {
                x.copy_from_slice(init.point(i));
                let mut weight = 0.0;
                for k in 0..grid.n_steps {
                    let t = grid.node(k);
                    model.drift_directional_derivative(t, &x, law.at(k), v, &mut grad)?;
                    let lag = t - grid.start;
                    w.iter_mut().zip(v.iter().zip(&grad)).for_each(|(w, (v, g))| *w = v - lag * g);
                    mat_vec(&inv, &w, &mut sw);
                    em_step(model, t, grid.dt, &x, law.at(k), noise, i as u64, grid.global_step(k), &mut scratch, &mut next);
                    weight += sq * dot(&sw, &scratch.z);
                    std::mem::swap(&mut x, &mut next);
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { trajectory: i, step: k + 1 });
                    }
                    if radius.is_some_and(|r| crate::measure::norm(&x) > r) {
                        return Err(Error::RadiusExceeded { trajectory: i, step: k + 1, radius: radius.unwrap() });
                    }
                }
                out.push((f.directional_derivative(&x, v), f.value(&x), weight / tau));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let samples: Vec<(f64, f64, f64)> = per_chunk.into_iter().flatten().collect();
    let lhs_s: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let rhs_s: Vec<f64> = samples.iter().map(|s| s.1 * s.2).collect();
    let diff_s: Vec<f64> = lhs_s.iter().zip(&rhs_s).map(|(a, b)| a - b).collect();
    let (lhs, rhs, diff) = (Estimate::from_samples(&lhs_s), Estimate::from_samples(&rhs_s), Estimate::from_samples(&diff_s));
    let lhs_exact = match f {
        TestFunction::Linear { u } => Some(dot(u, v)),
        _ => None,
    };
    let z_score = if diff.se > 0.0 { diff.mean / diff.se } else if diff.mean == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(IbpCheck { lhs: lhs.mean, lhs_se: lhs.se, rhs: rhs.mean, rhs_se: rhs.se, diff_se: diff.se, z_score, lhs_exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LandauModel, LinearMeanField};

    #[test]
    fn integral_closed_form() {
        assert!((shift_harnack_integral(2.0, 0.0, 3.0) - 12.0).abs() < 1e-14);
        // λ=1, G=1, τ=1: ∫(1+r)² = 7/3
        assert!((shift_harnack_integral(1.0, 1.0, 1.0) - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_shift_is_jensen() {
        let model = LinearMeanField::isotropic(1.0, 0.5, 1.0, 2).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 50).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[0.3, -0.2]).unwrap();
        let opts = ShiftOptions { n_paths: 500, law_particles: 200 };
        for f in TestFunction::bundled_positive() {
            let c = shift_coupling_verify(&model, &f, &[0.0, 0.0], &mu0, 2.0, &grid, &NoiseSpec::new(1, 2), &opts).unwrap();
            assert_eq!(c.constant, 1.0);
            assert!(c.slack >= 0.0, "{}: {}", f.name(), c.slack);
            assert!(c.log_slack.unwrap() >= 0.0);
        }
    }

    #[test]
    fn refuses_multiplicative_noise() {
        let model = LandauModel::new(0.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[0.0; 3]).unwrap();
        let f = TestFunction::Constant { value: 1.0 };
        let r = integration_by_parts_check(&model, &f, &[1.0, 0.0, 0.0], &mu0, &grid, &NoiseSpec::new(0, 3), &ShiftOptions::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_function_has_zero_gradient_and_weight_mean_zero() {
        let model = LinearMeanField::isotropic(1.0, 0.25, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[0.0]).unwrap();
        let f = TestFunction::Constant { value: 2.0 };
        let opts = ShiftOptions { n_paths: 4000, law_particles: 200 };
        let c = integration_by_parts_check(&model, &f, &[1.0], &mu0, &grid, &NoiseSpec::new(3, 1), &opts).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.z_score.abs() < 3.0);
    }

    #[test]
    fn linear_function_matches_inner_product() {
        let model = LinearMeanField::isotropic(1.0, 0.25, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let mu0 = EmpiricalMeasure::dirac(&[0.5]).unwrap();
        let f = TestFunction::Linear { u: vec![1.5] };
        let opts = ShiftOptions { n_paths: 20_000, law_particles: 500 };
        let c = integration_by_parts_check(&model, &f, &[1.0], &mu0, &grid, &NoiseSpec::new(4, 1), &opts).unwrap();
        assert_eq!(c.lhs_exact, Some(1.5));
        assert!((c.lhs - 1.5).abs() < 1e-12);
        assert!((c.rhs - 1.5).abs() < 3.0 * c.rhs_se, "{} ± {}", c.rhs, c.rhs_se);
    }
}
