use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::measure::{EmpiricalMeasure, Method};
use crate::models::CoefficientModel;
use crate::rng::NoiseSpec;
use crate::sde::euler_maruyama;
use crate::Error;

use super::LawCurve;

/// Consecutive increases of the delta that count as divergence.
const DIVERGENCE_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub theta: f64,
    pub method: Method,
    /// Compare successive iterates only at every `node_stride`-th node (and the last).
    pub node_stride: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { max_iter: 20, tol: 1e-6, theta: 2.0, method: Method::Auto, node_stride: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    /// Iterate 0 (constant at μ₀) through the last computed iterate.
    pub iterates: Vec<LawCurve>,
    /// `deltas[n-1] = sup_k W_θ(μ⁽ⁿ⁾_k, μ⁽ⁿ⁻¹⁾_k)`
    pub deltas: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Whether the geometric decay of the deltas is expected: θ ≥ 2 or σ free of μ.
    pub geometric_bound_applicable: bool,
}

impl PicardReport {
    pub fn solution(&self) -> &LawCurve {
        self.iterates.last().expect("at least the initial iterate")
    }

    /// `deltas[n] / deltas[n-1]`, skipping pairs with a zero denominator.
    pub fn delta_ratios(&self) -> Vec<f64> {
        self.deltas.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration in law: iterate `n` is the law curve of the classical SDE
/// whose coefficients read iterate `n − 1`. All iterates share the noise
/// streams of `noise`.
pub fn picard_solve(
    model: &dyn CoefficientModel,
    mu0: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    opts: &PicardOptions,
) -> Result<PicardReport, Error> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("Picard tolerance must be positive, got {}", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("Picard iteration needs max_iter >= 1".into()));
    }
    let geometric_bound_applicable = opts.theta >= 2.0 || model.flags().distribution_free_sigma;
    let mut iterates = vec![LawCurve::constant(*grid, mu0.clone())];
    let mut deltas: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut growth_run = 0;
    for _ in 0..opts.max_iter {
        let prev = iterates.last().unwrap();
        let ens = euler_maruyama(model, prev, mu0, grid, noise)?;
        let next = LawCurve::from_ensemble(&ens);
        let delta = next.sup_distance(prev, opts.theta, opts.method, opts.node_stride)?;
        if let Some(&last) = deltas.last() {
            growth_run = if delta > last { growth_run + 1 } else { 0 };
        }
        deltas.push(delta);
        iterates.push(next);
        if delta <= opts.tol {
            converged = true;
            break;
        }
        if growth_run >= DIVERGENCE_RUN {
            return Err(Error::PicardDivergence { deltas });
        }
    }
    let iterations_used = deltas.len();
    Ok(PicardReport { iterates, deltas, converged, iterations_used, geometric_bound_applicable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::wasserstein;
    use crate::models::{LandauModel, LinearMeanField};
    use crate::solver::particle_solve;
    use crate::stats::Estimate;

    fn gaussian(seed: u64, d: usize, n: usize, mean: f64) -> EmpiricalMeasure {
        let mut pts = vec![0.0; n * d];
        NoiseSpec::new(seed, d).fill_standard_normal(0, 0, &mut pts);
        pts.iter_mut().for_each(|v| *v += mean);
        EmpiricalMeasure::new(d, pts).unwrap()
    }

    #[test]
    fn law_free_coefficients_converge_after_one_step() {
        let model = LandauModel::new(0.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.2, 40).unwrap();
        let mu0 = gaussian(1, 3, 64, 0.0);
        let opts = PicardOptions { max_iter: 3, tol: 1e-12, method: Method::Exact, ..Default::default() };
        let report = picard_solve(&model, &mu0, &grid, &NoiseSpec::new(2, 3), &opts).unwrap();
        assert_eq!(report.iterates[2], report.iterates[1]);
        assert_eq!(report.deltas[1], 0.0);
        assert!(report.converged);
        assert_eq!(report.iterations_used, 2);
    }

    #[test]
    fn linear_model_mean_matches_ode_and_particles() {
        let model = LinearMeanField::isotropic(2.0, 1.0, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let mu0 = gaussian(3, 1, 512, 1.0);
        let noise = NoiseSpec::new(4, 1);
        let opts = PicardOptions { max_iter: 30, tol: 1e-10, ..Default::default() };
        let report = picard_solve(&model, &mu0, &grid, &noise, &opts).unwrap();
        assert!(report.converged);
        let term = report.solution().terminal();
        let e = Estimate::from_samples(term.as_flat());
        let m0 = mu0.mean()[0];
        assert!((e.mean - m0 * (-1.0f64).exp()).abs() < 3.0 * e.se + 5.0 * grid.dt);
        let (law, _) = particle_solve(&model, &mu0, &grid, &noise, 512).unwrap();
        let w = wasserstein(term, law.terminal(), 2.0, Method::Exact).unwrap();
        assert!(w < 0.05, "Picard vs particle terminal W2 {w}");
    }

    #[test]
    fn deltas_decay_geometrically_on_a_short_horizon() {
        let model = LinearMeanField::isotropic(2.0, 1.0, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 500).unwrap();
        let mu0 = gaussian(5, 1, 256, 1.0);
        let opts = PicardOptions { max_iter: 6, tol: 1e-300, ..Default::default() };
        let report = picard_solve(&model, &mu0, &grid, &NoiseSpec::new(6, 1), &opts).unwrap();
        assert!(report.geometric_bound_applicable);
        let ratios = report.delta_ratios();
        assert_eq!(ratios.len(), 5);
        assert!(ratios.iter().all(|&r| r <= (-1.0f64).exp() + 0.15), "{ratios:?}");
    }

    #[test]
    fn growing_deltas_are_divergence() {
        // m⁽ⁿ⁾′ = 3 m⁽ⁿ⁻¹⁾ over a long horizon: deltas grow like 15ⁿ/n!
        let model = LinearMeanField::isotropic(0.0, 3.0, 0.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 200).unwrap();
        let mu0 = EmpiricalMeasure::new(1, vec![1.0, 2.0]).unwrap();
        let opts = PicardOptions { max_iter: 10, tol: 1e-12, ..Default::default() };
        let err = picard_solve(&model, &mu0, &grid, &NoiseSpec::new(0, 1), &opts).unwrap_err();
        match err {
            Error::PicardDivergence { deltas } => assert_eq!(deltas.len(), 4),
            other => panic!("unexpected {other}"),
        }
    }
}
