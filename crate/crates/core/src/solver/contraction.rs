use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::measure::{assignment, dist_sq, EmpiricalMeasure};
use crate::models::CoefficientModel;
use crate::rng::NoiseSpec;
use crate::sde::{check_dims, step_all};
use crate::stats::ols_slope;
use crate::Error;

/// Coupling costs below this are treated as merged laws.
const MERGE_FLOOR: f64 = 1e-280;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `(1/N) Σ |X_i(t) − Y_i(t)|²`, an upper bound on `W₂(μ_t, ν_t)²`.
    pub w2_sq: Vec<f64>,
    /// `w2_sq[0] · exp(bound_rate · t)` when the model declares a rate.
    pub envelope: Option<Vec<f64>>,
    /// Least-squares slope of `log w2_sq` over the fit window; `−∞` once the laws merge.
    pub empirical_rate: f64,
    pub bound_rate: Option<f64>,
    pub merge_time: Option<f64>,
    pub fit_window: (f64, f64),
}

/// Reorder `nu` so that point `i` is matched to `mu.point(i)` by an optimal plan.
pub fn optimally_paired(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<EmpiricalMeasure, Error> {
    if mu.len() != nu.len() {
        return Err(Error::UnequalSizes { left: mu.len(), right: nu.len() });
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let n = mu.len();
    let perm = if mu.dim() == 1 {
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.sort_by(|&i, &j| mu.as_flat()[i].total_cmp(&mu.as_flat()[j]));
        b.sort_by(|&i, &j| nu.as_flat()[i].total_cmp(&nu.as_flat()[j]));
        let mut perm = vec![0; n];
        for (i, j) in a.into_iter().zip(b) {
            perm[i] = j;
        }
        perm
    } else {
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cost[i * n + j] = dist_sq(mu.point(i), nu.point(j));
            }
        }
        assignment(&cost, n)
    };
    let pts = perm.iter().flat_map(|&j| nu.point(j).to_vec()).collect();
    EmpiricalMeasure::new(nu.dim(), pts)
}

/// Two interacting particle systems from `mu0`, `nu0` driven by the same
/// noise, started from an optimal pairing; the decay rate of the coupling
/// cost is fitted on `fit_window` (default: the last 90% of the horizon).
pub fn estimate_contraction(
    model: &dyn CoefficientModel,
    mu0: &EmpiricalMeasure,
    nu0: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    fit_window: Option<(f64, f64)>,
) -> Result<ContractionReport, Error> {
    let n = mu0.len().min(nu0.len());
    if n < 2 {
        return Err(Error::InvalidArgument("contraction estimate needs at least 2 particles".into()));
    }
    let x0 = mu0.subsample(n);
    let y0 = optimally_paired(&x0, &nu0.subsample(n))?;
    check_dims(model, &x0, noise)?;
    check_dims(model, &y0, noise)?;
    let d = model.dim();
    let horizon = grid.end() - grid.start;
    let window = fit_window.unwrap_or((grid.start + 0.1 * horizon, grid.end()));
    if !(window.1 > window.0) {
        return Err(Error::InvalidArgument(format!("empty fit window {window:?}")));
    }

    let cost = |a: &EmpiricalMeasure, b: &EmpiricalMeasure| {
        a.points().zip(b.points()).map(|(p, q)| dist_sq(p, q)).sum::<f64>() / n as f64
    };
    let mut w2_sq = vec![cost(&x0, &y0)];
    let (mut x, mut y) = (x0, y0);
    let mut nx = vec![0.0; n * d];
    let mut ny = vec![0.0; n * d];
    for k in 0..grid.n_steps {
        step_all(model, grid, k, x.as_flat(), &x, noise, &mut nx)?;
        step_all(model, grid, k, y.as_flat(), &y, noise, &mut ny)?;
        x = EmpiricalMeasure::new(d, nx.clone())?;
        y = EmpiricalMeasure::new(d, ny.clone())?;
        w2_sq.push(cost(&x, &y));
    }

    let times: Vec<f64> = grid.nodes().collect();
    let merge_time = times.iter().zip(&w2_sq).find(|(_, &w)| !(w > MERGE_FLOOR)).map(|(&t, _)| t);
    let empirical_rate = if merge_time.is_some() {
        f64::NEG_INFINITY
    } else {
        let (ts, ls): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&w2_sq)
            .filter(|(&t, _)| t >= window.0 - 1e-12 && t <= window.1 + 1e-12)
            .map(|(&t, &w)| (t, w.ln()))
            .unzip();
        if ts.len() < 2 {
            return Err(Error::InvalidArgument(format!("fit window {window:?} holds fewer than two grid nodes")));
        }
        ols_slope(&ts, &ls)
    };
    let bound_rate = model.bounds().contraction_rate();
    let envelope = bound_rate.map(|r| times.iter().map(|t| w2_sq[0] * (r * (t - grid.start)).exp()).collect());
    Ok(ContractionReport { times, w2_sq, envelope, empirical_rate, bound_rate, merge_time, fit_window: window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{wasserstein, Method};
    use crate::models::LinearMeanField;

    #[test]
    fn pairing_realizes_the_exact_distance() {
        let noise = NoiseSpec::new(3, 2);
        let mut a = vec![0.0; 40];
        let mut b = vec![0.0; 40];
        noise.fill_standard_normal(0, 0, &mut a);
        noise.fill_standard_normal(1, 0, &mut b);
        let mu = EmpiricalMeasure::new(2, a).unwrap();
        let nu = EmpiricalMeasure::new(2, b).unwrap();
        let paired = optimally_paired(&mu, &nu).unwrap();
        let cost: f64 = mu.points().zip(paired.points()).map(|(p, q)| dist_sq(p, q)).sum::<f64>() / 20.0;
        let w = wasserstein(&mu, &nu, 2.0, Method::Exact).unwrap();
        assert!((cost - w * w).abs() < 1e-12);
    }

    #[test]
    fn ou_gap_rate_is_minus_two() {
        let model = LinearMeanField::isotropic(1.0, 0.0, 1.0, 2).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let mu0 = EmpiricalMeasure::new(2, (0..64).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let nu0 = mu0.shifted(&[1.0, 0.5]).unwrap();
        let r = estimate_contraction(&model, &mu0, &nu0, &grid, &NoiseSpec::new(1, 2), None).unwrap();
        // discrete gap contracts by (1 − Δt) per step
        let exact = 2.0 * (1.0 - grid.dt).ln() / grid.dt;
        assert!((r.empirical_rate - exact).abs() < 1e-9, "{}", r.empirical_rate);
        assert_eq!(r.bound_rate, Some(-2.0));
        assert!(r.merge_time.is_none());
    }

    #[test]
    fn identical_laws_merge_at_time_zero() {
        let model = LinearMeanField::isotropic(1.0, 0.0, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let mu0 = EmpiricalMeasure::new(1, vec![0.0, 1.0, 2.0]).unwrap();
        let r = estimate_contraction(&model, &mu0, &mu0, &grid, &NoiseSpec::new(1, 1), None).unwrap();
        assert!(r.w2_sq.iter().all(|&w| w == 0.0));
        assert_eq!(r.empirical_rate, f64::NEG_INFINITY);
        assert_eq!(r.merge_time, Some(0.0));
    }
}
