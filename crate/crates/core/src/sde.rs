//! Euler–Maruyama stepping against a frozen law curve.

use rayon::prelude::*;

use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::models::CoefficientModel;
use crate::rng::NoiseSpec;
use crate::solver::LawCurve;
use crate::Error;

/// `M` trajectories on a time grid.
///
/// Stored node-major: the `M × d` block of node `k` is contiguous, which is
/// the layout every step writes and every law lookup reads.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    states: Vec<f64>,
    noise: NoiseSpec,
}

impl PathEnsemble {
    pub(crate) fn from_states(grid: TimeGrid, dim: usize, n_paths: usize, states: Vec<f64>, noise: NoiseSpec) -> Self {
        debug_assert_eq!(states.len(), grid.n_nodes() * n_paths * dim);
        Self { grid, dim, n_paths, states, noise }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.n_paths == 0
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// State of trajectory `m` at node `k`.
    #[inline]
    pub fn state(&self, m: usize, k: usize) -> &[f64] {
        let off = (k * self.n_paths + m) * self.dim;
        &self.states[off..off + self.dim]
    }

    /// All states at node `k`, row-major `M × d`.
    pub fn node_states(&self, k: usize) -> &[f64] {
        let block = self.n_paths * self.dim;
        &self.states[k * block..(k + 1) * block]
    }

    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.node_states(k).to_vec()).expect("ensemble states are finite")
    }

    pub fn terminal(&self) -> EmpiricalMeasure {
        self.measure_at(self.grid.n_steps)
    }

    /// Trajectory `m` as `(n_steps + 1) × d` values.
    pub fn path(&self, m: usize) -> Vec<f64> {
        (0..self.grid.n_nodes()).flat_map(|k| self.state(m, k).to_vec()).collect()
    }

    /// Bit patterns of every stored state, for reproducibility checks.
    pub fn fingerprint(&self) -> Vec<u64> {
        self.states.iter().map(|v| v.to_bits()).collect()
    }

    /// Write `t,trajectory,x0,..,x{d-1}` rows with a header, node-major.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "trajectory".to_string()];
        header.extend((0..self.dim).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for k in 0..self.grid.n_nodes() {
            let t = self.grid.node(k).to_string();
            for m in 0..self.n_paths {
                let mut rec = vec![t.clone(), m.to_string()];
                rec.extend(self.state(m, k).iter().map(|v| v.to_string()));
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-thread buffers for one coefficient evaluation.
pub(crate) struct Scratch {
    pub drift: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
}

impl Scratch {
    pub fn new(d: usize) -> Self {
        Self { drift: vec![0.0; d], sigma: vec![0.0; d * d], z: vec![0.0; d] }
    }
}

/// One Euler–Maruyama step of a single trajectory; the standard normal draws
/// used are left in `scratch.z`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn em_step(
    model: &dyn CoefficientModel,
    t: f64,
    dt: f64,
    x: &[f64],
    mu: &EmpiricalMeasure,
    noise: &NoiseSpec,
    trajectory: u64,
    global_step: u64,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let d = x.len();
    noise.fill_standard_normal(trajectory, global_step, &mut scratch.z);
    model.drift(t, x, mu, &mut scratch.drift);
    model.diffusion(t, x, mu, &mut scratch.sigma);
    let sq = dt.sqrt();
    for i in 0..d {
        let row = &scratch.sigma[i * d..(i + 1) * d];
        let noise_term: f64 = row.iter().zip(&scratch.z).map(|(s, z)| s * z).sum();
        out[i] = x[i] + scratch.drift[i] * dt + noise_term * sq;
    }
}

/// Advance every trajectory of `current` by one step against `mu`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_all(
    model: &dyn CoefficientModel,
    grid: &TimeGrid,
    k: usize,
    current: &[f64],
    mu: &EmpiricalMeasure,
    noise: &NoiseSpec,
    next: &mut [f64],
) -> Result<(), Error> {
    let d = model.dim();
    let t = grid.node(k);
    let gstep = grid.global_step(k);
    next.par_chunks_mut(d)
        .zip(current.par_chunks(d))
        .enumerate()
        .with_min_len(64)
        .for_each_init(
            || Scratch::new(d),
            |s, (m, (out, x))| em_step(model, t, grid.dt, x, mu, noise, m as u64, gstep, s, out),
        );
    check_states(next, d, k + 1, model.state_radius())
}

/// Fail on the lowest-index trajectory that is non-finite or outside the guard radius.
pub(crate) fn check_states(states: &[f64], d: usize, step: usize, radius: Option<f64>) -> Result<(), Error> {
    for (m, x) in states.chunks_exact(d).enumerate() {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { trajectory: m, step });
        }
        if let Some(r) = radius {
            if crate::measure::norm(x) > r {
                return Err(Error::RadiusExceeded { trajectory: m, step, radius: r });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_dims(model: &dyn CoefficientModel, init: &EmpiricalMeasure, noise: &NoiseSpec) -> Result<(), Error> {
    let d = model.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: init.dim() });
    }
    if noise.dim != d {
        return Err(Error::DimensionMismatch { expected: d, found: noise.dim });
    }
    Ok(())
}

/// Simulate one trajectory per point of `init`; trajectory `m` starts at
/// `init.point(m)` and consumes noise stream `m`. The coefficients at step `k`
/// read `law.at(k)`.
pub fn euler_maruyama(
    model: &dyn CoefficientModel,
    law: &LawCurve,
    init: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<PathEnsemble, Error> {
    check_dims(model, init, noise)?;
    law.check_covers(grid, model.dim())?;
    let d = model.dim();
    let m = init.len();
    let block = m * d;
    let mut states = vec![0.0; grid.n_nodes() * block];
    states[..block].copy_from_slice(init.as_flat());
    check_states(&states[..block], d, 0, model.state_radius())?;
    for k in 0..grid.n_steps {
        let (done, rest) = states.split_at_mut((k + 1) * block);
        step_all(model, grid, k, &done[k * block..], law.at(k), noise, &mut rest[..block])?;
    }
    Ok(PathEnsemble::from_states(*grid, d, m, states, *noise))
}

/// Terminal states of [`euler_maruyama`] without storing the paths.
pub fn euler_terminal(
    model: &dyn CoefficientModel,
    law: &LawCurve,
    init: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<EmpiricalMeasure, Error> {
    check_dims(model, init, noise)?;
    law.check_covers(grid, model.dim())?;
    let mut current = init.as_flat().to_vec();
    check_states(&current, model.dim(), 0, model.state_radius())?;
    let mut next = vec![0.0; current.len()];
    for k in 0..grid.n_steps {
        step_all(model, grid, k, &current, law.at(k), noise, &mut next)?;
        std::mem::swap(&mut current, &mut next);
    }
    EmpiricalMeasure::new(model.dim(), current)
}

/// Two ensembles driven by identical increments per `(trajectory, step)`.
#[allow(clippy::too_many_arguments)]
pub fn synchronous_pair(
    model: &dyn CoefficientModel,
    law_x: &LawCurve,
    law_y: &LawCurve,
    init_x: &EmpiricalMeasure,
    init_y: &EmpiricalMeasure,
    grid: &TimeGrid,
    noise: &NoiseSpec,
) -> Result<(PathEnsemble, PathEnsemble), Error> {
    if init_x.len() != init_y.len() {
        return Err(Error::UnequalSizes { left: init_x.len(), right: init_y.len() });
    }
    let x = euler_maruyama(model, law_x, init_x, grid, noise)?;
    let y = euler_maruyama(model, law_y, init_y, grid, noise)?;
    Ok((x, y))
}
