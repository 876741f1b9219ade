//! Solution schemes for the distribution-dependent SDE: Picard iteration in
//! law and the interacting particle system, plus contraction-rate and
//! invariant-measure estimation.

mod contraction;
mod invariant;
mod law;
mod particle;
mod picard;

use serde::{Deserialize, Serialize};

pub use contraction::{estimate_contraction, optimally_paired, ContractionReport};
pub use invariant::{find_invariant, InvariantOptions, InvariantReport};
pub use law::LawCurve;
pub use particle::{evolve_particles, initial_particles, particle_solve};
pub use picard::{picard_solve, PicardOptions, PicardReport};

use crate::measure::norm;
use crate::sde::PathEnsemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    /// `(1/M) Σ_m |X_m(t_k)|^p` per node.
    pub per_node: Vec<f64>,
    /// `(1/M) Σ_m max_k |X_m(t_k)|^p`
    pub sup_moment: f64,
}

pub fn moment_curve(ensemble: &PathEnsemble, p: f64) -> MomentCurve {
    assert!(p >= 0.0, "moment order must be nonnegative");
    let m = ensemble.len();
    let nodes = ensemble.grid().n_nodes();
    let mut per_node = vec![0.0; nodes];
    let mut sup = vec![0.0f64; m];
    for (k, acc) in per_node.iter_mut().enumerate() {
        for (i, s) in sup.iter_mut().enumerate() {
            let v = norm(ensemble.state(i, k)).powf(p);
            *acc += v;
            *s = s.max(v);
        }
        *acc /= m as f64;
    }
    MomentCurve { per_node, sup_moment: sup.iter().sum::<f64>() / m as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::measure::EmpiricalMeasure;
    use crate::models::{LandauModel, LinearMeanField};
    use crate::rng::NoiseSpec;
    use crate::stats::Estimate;

    #[test]
    fn constant_paths_have_constant_moments() {
        let model = LinearMeanField::isotropic(0.0, 0.0, 0.0, 2).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let (_, ens) = particle_solve(&model, &EmpiricalMeasure::dirac(&[3.0, 4.0]).unwrap(), &grid, &NoiseSpec::new(0, 2), 4).unwrap();
        let mc = moment_curve(&ens, 1.5);
        assert!(mc.per_node.iter().all(|&v| (v - 5f64.powf(1.5)).abs() < 1e-12));
        assert!((mc.sup_moment - 5f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn brownian_second_moment_is_d_t() {
        let model = LinearMeanField::isotropic(0.0, 0.0, 1.0, 3).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let (_, ens) = particle_solve(&model, &EmpiricalMeasure::dirac(&[0.0; 3]).unwrap(), &grid, &NoiseSpec::new(2, 3), 10_000).unwrap();
        let sq: Vec<f64> = ens.terminal().points().map(|p| p.iter().map(|v| v * v).sum()).collect();
        let e = Estimate::from_samples(&sq);
        assert!((moment_curve(&ens, 2.0).per_node[50] - e.mean).abs() < 1e-12);
        assert!((e.mean - 3.0).abs() < 3.0 * e.se);
    }

    #[test]
    fn landau_moments_stay_finite_at_two_resolutions() {
        let model = LandauModel::new(0.0, 1.0, 1.0).unwrap();
        let mut pts = vec![0.0; 3 * 200];
        NoiseSpec::new(1, 3).fill_standard_normal(0, 0, &mut pts);
        let mu0 = EmpiricalMeasure::new(3, pts).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        for g in [grid, grid.refined()] {
            let (_, ens) = particle_solve(&model, &mu0, &g, &NoiseSpec::new(2, 3), 200).unwrap();
            let mc = moment_curve(&ens, 2.0);
            assert!(mc.sup_moment.is_finite() && mc.per_node.iter().all(|v| v.is_finite() && *v < 100.0));
        }
    }
}
