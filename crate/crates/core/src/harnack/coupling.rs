use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::functions::{dot, TestFunction};
use crate::grid::TimeGrid;
use crate::measure::{dist_sq, EmpiricalMeasure, EXACT_SIZE_LIMIT};
use crate::models::{invert, mat_vec, CoefficientModel};
use crate::rng::NoiseSpec;
use crate::sde::{check_dims, Scratch};
use crate::solver::{optimally_paired, particle_solve, LawCurve};
use crate::stats::{effective_sample_size, Estimate};
use crate::Error;

use super::{require_harnack_model, CouplingConfig};

/// Pairs per unit of parallel work; fixed so node sums never depend on the thread count.
const CHUNK: usize = 128;
/// Stream tag of the law-curve runs. Both runs share it, so equal initial
/// laws give equal curves.
const LAW_TAG: u64 = 0x4c41_575f_58;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    /// Particles in the independent runs that produce `μ_t` and `ν_t`.
    pub law_particles: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self { law_particles: 2000 }
    }
}

/// Terminal statistics of a coupling run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    /// `E[R_T |X_T − Y_T|²]` with `Y_T` before the terminal snap.
    pub terminal_gap_q: f64,
    pub weight_mean: f64,
    pub weight_mean_se: f64,
    /// `E[R_T log R_T]`
    pub weight_entropy: f64,
    pub weight_entropy_se: f64,
    /// `φ(s, T) · E|X_s − Y_s|²`
    pub phi_bound: f64,
    pub ess: f64,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct CouplingRun {
    pub result: CouplingResult,
    pub times: Vec<f64>,
    pub gap_q: Vec<f64>,
    pub weight_mean: Vec<f64>,
    pub weight_entropy: Vec<f64>,
    /// `X_T` per pair.
    pub terminal_x: EmpiricalMeasure,
    pub log_weights: Vec<f64>,
    /// `E|X_s − Y_s|²` over the pairs.
    pub initial_cost: f64,
    pub phi: f64,
    /// ESS below a tenth of the pair count.
    pub low_ess: bool,
    /// Pairs with `|log R_T|` above the configured clip.
    pub clipped: usize,
}

struct ChunkOut {
    gap: Vec<f64>,
    weight: Vec<f64>,
    entropy: Vec<f64>,
    terminal: Vec<f64>,
    log_r: Vec<f64>,
    gap_t: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn simulate_chunk(
    model: &dyn CoefficientModel,
    law_x: &LawCurve,
    law_y: &LawCurve,
    x0: &EmpiricalMeasure,
    y0: &EmpiricalMeasure,
    config: &CouplingConfig,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    fixed_inverse: Option<&[f64]>,
    pairs: std::ops::Range<usize>,
) -> Result<ChunkOut, Error> {
    let d = model.dim();
    let n = grid.n_steps;
    let mut out = ChunkOut {
        gap: vec![0.0; n + 1],
        weight: vec![0.0; n + 1],
        entropy: vec![0.0; n + 1],
        terminal: Vec::with_capacity(pairs.len() * d),
        log_r: Vec::with_capacity(pairs.len()),
        gap_t: Vec::with_capacity(pairs.len()),
    };
    let mut sx = Scratch::new(d);
    let mut sy = Scratch::new(d);
    let mut inv = vec![0.0; d * d];
    let (mut diff, mut h, mut sh) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let sq = grid.dt.sqrt();
    for m in pairs {
        let mut x = x0.point(m).to_vec();
        let mut y = y0.point(m).to_vec();
        let mut log_r = 0.0;
        let mut gap_t = 0.0;
        out.gap[0] += dist_sq(&x, &y);
        out.weight[0] += 1.0;
        for k in 0..n {
            let t = grid.node(k);
            let (mu, nu) = (law_x.at(k), law_y.at(k));
            noise.fill_standard_normal(m as u64, grid.global_step(k), &mut sx.z);
            model.drift(t, &x, mu, &mut sx.drift);
            model.diffusion(t, &x, mu, &mut sx.sigma);
            match fixed_inverse {
                Some(fi) => inv.copy_from_slice(fi),
                None => {
                    inv = invert(&sx.sigma, d).ok_or(Error::SingularDiffusion { trajectory: m, step: k })?;
                }
            }
            let xi = config.xi(t);
            for i in 0..d {
                diff[i] = y[i] - x[i];
            }
            // h = σ(X)⁻¹(Y − X)/ξ
            mat_vec(&inv, &diff, &mut h);
            h.iter_mut().for_each(|v| *v /= xi);
            log_r += sq * dot(&h, &sx.z) - 0.5 * grid.dt * dot(&h, &h);

            model.drift(t, &y, nu, &mut sy.drift);
            model.diffusion(t, &y, nu, &mut sy.sigma);
            mat_vec(&sy.sigma, &h, &mut sh);
            for i in 0..d {
                let row_x = &sx.sigma[i * d..(i + 1) * d];
                let row_y = &sy.sigma[i * d..(i + 1) * d];
                let nx: f64 = row_x.iter().zip(&sx.z).map(|(s, z)| s * z).sum();
                let ny: f64 = row_y.iter().zip(&sx.z).map(|(s, z)| s * z).sum();
                x[i] += sx.drift[i] * grid.dt + nx * sq;
                y[i] += (sy.drift[i] - sh[i]) * grid.dt + ny * sq;
            }
            if x.iter().chain(&y).any(|v| !v.is_finite()) || !log_r.is_finite() {
                return Err(Error::NonFinite { trajectory: m, step: k + 1 });
            }
            let r = log_r.exp();
            let g = dist_sq(&x, &y);
            if k + 1 == n {
                gap_t = g;
                y.copy_from_slice(&x);
            }
            out.gap[k + 1] += r * g;
            out.weight[k + 1] += r;
            out.entropy[k + 1] += r * log_r;
        }
        out.terminal.extend_from_slice(&x);
        out.log_r.push(log_r);
        out.gap_t.push(gap_t);
    }
    Ok(out)
}

/// Simulate `X` from `x0` and the coupled `Y` from `y0` pairwise (pair `m`
/// uses noise stream `m`), accumulating the Girsanov weight of the drift
/// correction. `μ_t, ν_t` come from particle runs on a derived stream family.
pub fn coupled_girsanov(
    model: &dyn CoefficientModel,
    x0: &EmpiricalMeasure,
    y0: &EmpiricalMeasure,
    config: &CouplingConfig,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    opts: &CouplingOptions,
) -> Result<CouplingRun, Error> {
    require_harnack_model(model)?;
    config.validate()?;
    if x0.len() != y0.len() {
        return Err(Error::UnequalSizes { left: x0.len(), right: y0.len() });
    }
    check_dims(model, x0, noise)?;
    check_dims(model, y0, noise)?;
    if (grid.end() - config.horizon).abs() > 1e-9 * config.horizon.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid ends at {} but the coupling horizon is {}",
            grid.end(),
            config.horizon
        )));
    }
    let m = x0.len();
    let n_law = opts.law_particles.max(2);
    let (law_x, _) = particle_solve(model, &x0.subsample(n_law), grid, &noise.derive(LAW_TAG), n_law)?;
    let (law_y, _) = particle_solve(model, &y0.subsample(n_law), grid, &noise.derive(LAW_TAG), n_law)?;

    let fixed_inverse = if model.flags().additive_noise {
        let d = model.dim();
        let mut s = vec![0.0; d * d];
        model.diffusion(grid.start, x0.point(0), law_x.at(0), &mut s);
        Some(invert(&s, d).ok_or(Error::SingularDiffusion { trajectory: 0, step: 0 })?)
    } else {
        None
    };

    let n_chunks = m.div_ceil(CHUNK);
    let chunks = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(m);
            simulate_chunk(model, &law_x, &law_y, x0, y0, config, grid, noise, fixed_inverse.as_deref(), range)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let nodes = grid.n_nodes();
    let (mut gap_q, mut weight_mean, mut weight_entropy) = (vec![0.0; nodes], vec![0.0; nodes], vec![0.0; nodes]);
    let mut terminal = Vec::with_capacity(m * model.dim());
    let mut log_weights = Vec::with_capacity(m);
    let mut gaps = Vec::with_capacity(m);
    for c in chunks {
        for k in 0..nodes {
            gap_q[k] += c.gap[k];
            weight_mean[k] += c.weight[k];
            weight_entropy[k] += c.entropy[k];
        }
        terminal.extend(c.terminal);
        log_weights.extend(c.log_r);
        gaps.extend(c.gap_t);
    }
    for v in gap_q.iter_mut().chain(weight_mean.iter_mut()).chain(weight_entropy.iter_mut()) {
        *v /= m as f64;
    }

    let r: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
    let w = Estimate::from_samples(&r);
    let ent: Vec<f64> = r.iter().zip(&log_weights).map(|(r, l)| r * l).collect();
    let e = Estimate::from_samples(&ent);
    let gap_samples: Vec<f64> = r.iter().zip(&gaps).map(|(r, g)| r * g).collect();
    let initial_cost = x0.points().zip(y0.points()).map(|(p, q)| dist_sq(p, q)).sum::<f64>() / m as f64;
    let phi = config.phi(grid.start, config.horizon)?;
    let phi_bound = phi * initial_cost;
    let ess = effective_sample_size(&r);
    let success = (w.mean - 1.0).abs() <= 3.0 * w.se && e.mean <= phi_bound + 3.0 * e.se;
    let clipped = config.weight_clip.map_or(0, |c| log_weights.iter().filter(|l| l.abs() > c).count());
    let result = CouplingResult {
        terminal_gap_q: Estimate::from_samples(&gap_samples).mean,
        weight_mean: w.mean,
        weight_mean_se: w.se,
        weight_entropy: e.mean,
        weight_entropy_se: e.se,
        phi_bound,
        ess,
        success,
    };
    Ok(CouplingRun {
        result,
        times: grid.nodes().collect(),
        gap_q,
        weight_mean,
        weight_entropy,
        terminal_x: EmpiricalMeasure::new(model.dim(), terminal)?,
        log_weights,
        initial_cost,
        phi,
        low_ess: ess < m as f64 / 10.0,
        clipped,
    })
}

/// Pair `nu0` with `mu0` optimally when the assignment is affordable,
/// otherwise keep the given order (whose cost still bounds `W₂²` from above).
pub fn pair_initials(
    mu0: &EmpiricalMeasure,
    nu0: &EmpiricalMeasure,
) -> Result<(EmpiricalMeasure, EmpiricalMeasure), Error> {
    let n = mu0.len().min(nu0.len());
    let (x0, y0) = (mu0.subsample(n), nu0.subsample(n));
    if x0.dim() == 1 || n <= EXACT_SIZE_LIMIT {
        let y0 = optimally_paired(&x0, &y0)?;
        Ok((x0, y0))
    } else {
        Ok((x0, y0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub slack: f64,
    pub slack_se: f64,
    pub phi: f64,
    pub initial_cost: f64,
    pub ess: f64,
    pub violated: bool,
}

/// `E_ν log f(Y_T) ≤ log E_μ f(X_T) + φ W₂²`, with the left side computed as
/// `E[R_T log f(X_T)]`. `phi_override` replaces `φ(s, T)` (e.g. by a sharper
/// constant known for the model).
#[allow(clippy::too_many_arguments)]
pub fn verify_log_harnack(
    model: &dyn CoefficientModel,
    f: &TestFunction,
    mu0: &EmpiricalMeasure,
    nu0: &EmpiricalMeasure,
    config: &CouplingConfig,
    grid: &TimeGrid,
    noise: &NoiseSpec,
    opts: &CouplingOptions,
    phi_override: Option<f64>,
) -> Result<HarnackCheck, Error> {
    f.validate(model.dim())?;
    if !f.is_positive() {
        return Err(Error::InvalidArgument(format!("log-Harnack needs a positive function, `{}` is not", f.name())));
    }
    let (x0, y0) = pair_initials(mu0, nu0)?;
    let run = coupled_girsanov(model, &x0, &y0, config, grid, noise, opts)?;
    let phi = phi_override.unwrap_or(run.phi);
    let vals: Vec<f64> = run.terminal_x.points().map(|x| f.value(x)).collect();
    if let Some(i) = vals.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("test function is not positive at the terminal state of pair {i}")));
    }
    let logs: Vec<f64> = run.terminal_x.points().map(|x| f.log_value(x)).collect();
    let weighted: Vec<f64> = run.log_weights.iter().zip(&logs).map(|(l, lf)| l.exp() * lf).collect();
    let lhs = Estimate::from_samples(&weighted);
    let fbar = Estimate::from_samples(&vals);
    let rhs = fbar.mean.ln() + phi * run.initial_cost;
    let lin: Vec<f64> = vals.iter().zip(&weighted).map(|(v, w)| v / fbar.mean - w).collect();
    let slack_se = Estimate::from_samples(&lin).se;
    let slack = rhs - lhs.mean;
    Ok(HarnackCheck {
        lhs: lhs.mean,
        lhs_se: lhs.se,
        rhs,
        rhs_se: fbar.se / fbar.mean,
        slack,
        slack_se,
        phi,
        initial_cost: run.initial_cost,
        ess: run.result.ess,
        violated: slack < -3.0 * slack_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LandauModel, LinearMeanField};

    fn gaussian(seed: u64, d: usize, n: usize) -> EmpiricalMeasure {
        let mut pts = vec![0.0; n * d];
        NoiseSpec::new(seed, d).fill_standard_normal(0, 0, &mut pts);
        EmpiricalMeasure::new(d, pts).unwrap()
    }

    #[test]
    fn identical_starts_give_unit_weights() {
        let model = LinearMeanField::isotropic(1.0, 0.25, 1.0, 2).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let cfg = CouplingConfig::from_bounds(&model.bounds(), 1.0).unwrap();
        let x0 = gaussian(1, 2, 300);
        let opts = CouplingOptions { law_particles: 300 };
        let run = coupled_girsanov(&model, &x0, &x0, &cfg, &grid, &NoiseSpec::new(2, 2), &opts).unwrap();
        assert!(run.log_weights.iter().all(|l| *l == 0.0));
        assert_eq!(run.result.terminal_gap_q, 0.0);
        assert_eq!(run.result.weight_entropy, 0.0);
    }

    #[test]
    fn brownian_weight_is_an_exact_shift() {
        let model = LinearMeanField::isotropic(0.0, 0.0, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let cfg = CouplingConfig::from_bounds(&model.bounds(), 1.0).unwrap();
        let x0 = EmpiricalMeasure::new(1, vec![0.0; 8]).unwrap();
        let y0 = EmpiricalMeasure::new(1, vec![1.0; 8]).unwrap();
        let noise = NoiseSpec::new(3, 1);
        let run = coupled_girsanov(&model, &x0, &y0, &cfg, &grid, &noise, &CouplingOptions { law_particles: 8 }).unwrap();
        // gap closes linearly, h ≡ (y − x)/T, log R = W_T − 1/2
        for m in 0..8 {
            let mut w = 0.0;
            for k in 0..100 {
                w += crate::rng::gaussian_increment(&noise, m as u64, k)[0] * grid.dt.sqrt();
            }
            assert!((run.log_weights[m] - (w - 0.5)).abs() < 1e-10);
        }
        assert!(run.result.terminal_gap_q < 1e-20);
    }

    #[test]
    fn refuses_degenerate_diffusion() {
        let model = LandauModel::new(0.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let cfg = CouplingConfig { horizon: 1.0, kappa1: 0.0, kappa2: 0.0, lambda: 1.0, gamma_t: None, weight_clip: None };
        let x0 = EmpiricalMeasure::dirac(&[0.0; 3]).unwrap();
        let err = coupled_girsanov(&model, &x0, &x0, &cfg, &grid, &NoiseSpec::new(0, 3), &CouplingOptions::default());
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_function_slack_is_the_bound() {
        let model = LinearMeanField::isotropic(1.0, 0.0, 1.0, 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let cfg = CouplingConfig::from_bounds(&model.bounds(), 1.0).unwrap();
        let mu0 = gaussian(4, 1, 200);
        let nu0 = mu0.shifted(&[0.5]).unwrap();
        let f = TestFunction::Constant { value: 3.0 };
        let opts = CouplingOptions { law_particles: 200 };
        let check = verify_log_harnack(&model, &f, &mu0, &nu0, &cfg, &grid, &NoiseSpec::new(5, 1), &opts, None).unwrap();
        assert!((check.initial_cost - 0.25).abs() < 1e-12);
        assert!(!check.violated);
        assert!(check.slack > 0.0);
    }
}
