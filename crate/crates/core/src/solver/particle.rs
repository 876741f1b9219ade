use std::sync::Arc;

use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::models::CoefficientModel;
use crate::rng::NoiseSpec;
use crate::sde::{check_dims, check_states, step_all, PathEnsemble};
use crate::Error;

use super::LawCurve;

/// `n` starting points drawn deterministically from `mu0`: strided when
/// `mu0` is larger, cycled when it is smaller.
pub fn initial_particles(mu0: &EmpiricalMeasure, n: usize) -> EmpiricalMeasure {
    let len = mu0.len();
    if n == len {
        return mu0.clone();
    }
    if n < len {
        return mu0.subsample(n);
    }
    let pts = (0..n).flat_map(|i| mu0.point(i % len).to_vec()).collect();
    EmpiricalMeasure::new(mu0.dim(), pts).expect("points of a valid measure")
}

/// Interacting particle system: at every step each particle reads the
/// empirical measure of all `n` current particles.
pub fn particle_solve(
    model: &dyn CoefficientModel,
    mu0: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    n: usize,
) -> Result<(LawCurve, PathEnsemble), Error> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("particle system needs at least 2 particles, got {n}")));
    }
    let init = initial_particles(mu0, n);
    check_dims(model, &init, noise)?;
    let d = model.dim();
    let block = n * d;
    let mut states = vec![0.0; grid.n_nodes() * block];
    states[..block].copy_from_slice(init.as_flat());
    check_states(&states[..block], d, 0, model.state_radius())?;
    let mut measures = Vec::with_capacity(grid.n_nodes());
    measures.push(Arc::new(init));
    for k in 0..grid.n_steps {
        let (done, rest) = states.split_at_mut((k + 1) * block);
        step_all(model, grid, k, &done[k * block..], &measures[k], noise, &mut rest[..block])?;
        measures.push(Arc::new(EmpiricalMeasure::new(d, rest[..block].to_vec())?));
    }
    let law = LawCurve::new(*grid, measures)?;
    Ok((law, PathEnsemble::from_states(*grid, d, n, states, *noise)))
}

/// Terminal particles only, for long horizons where paths are not needed.
pub fn evolve_particles(
    model: &dyn CoefficientModel,
    init: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<EmpiricalMeasure, Error> {
    check_dims(model, init, noise)?;
    let d = model.dim();
    let mut current = init.clone();
    let mut next = vec![0.0; init.as_flat().len()];
    for k in 0..grid.n_steps {
        step_all(model, grid, k, current.as_flat(), &current, noise, &mut next)?;
        current = EmpiricalMeasure::new(d, next.clone())?;
    }
    Ok(current)
}
