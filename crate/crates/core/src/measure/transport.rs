//! Optimal transport between equal-weight empirical measures.
//!
//! With equal sizes and equal weights the Kantorovich problem has a
//! permutation optimum, so the exact route is a linear assignment solved by
//! the Hungarian method in O(N³). In one dimension the monotone (sorted)
//! matching is optimal for every convex cost and is used instead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dist_sq, EmpiricalMeasure};
use crate::Error;

/// Above this size `Method::Auto` switches from the assignment solver to Sinkhorn.
pub const EXACT_SIZE_LIMIT: usize = 512;

const SINKHORN_MAX_ITER: usize = 10_000;
const SINKHORN_MARGINAL_TOL: f64 = 1e-8;
const ANNEAL_TOL: f64 = 1e-5;
const ANNEAL_FACTOR: f64 = 4.0;
const DEFAULT_EPS_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    /// Entropic regularization; `epsilon = None` picks 5% of the median cost.
    Entropic { epsilon: Option<f64> },
    /// Exact when `N <= EXACT_SIZE_LIMIT` or `d = 1`, entropic otherwise.
    /// Unequal sizes are reduced by strided subsampling of the larger measure.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportPlan {
    /// `perm[i]` is the target point matched to source point `i`.
    Permutation(Vec<usize>),
    /// Dense row-major coupling with marginals `1/N` and `1/M`; `marginal_error`
    /// is the largest row-sum deviation left when the iteration stopped.
    Coupling { rows: usize, cols: usize, matrix: Vec<f64>, epsilon: f64, marginal_error: f64 },
}

impl TransportPlan {
    pub fn permutation(&self) -> Option<&[usize]> {
        match self {
            TransportPlan::Permutation(p) => Some(p),
            TransportPlan::Coupling { .. } => None,
        }
    }
}

/// `W_θ(μ, ν)`.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64, method: Method) -> Result<f64, Error> {
    wasserstein_with_plan(mu, nu, theta, method).map(|(w, _)| w)
}

pub fn wasserstein_with_plan(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    theta: f64,
    method: Method,
) -> Result<(f64, TransportPlan), Error> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if !(theta >= 1.0) {
        return Err(Error::InvalidArgument(format!("transport order must be >= 1, got {theta}")));
    }
    match method {
        Method::Exact => {
            if mu.len() != nu.len() {
                return Err(Error::UnequalSizes { left: mu.len(), right: nu.len() });
            }
            Ok(exact(mu, nu, theta))
        }
        Method::Entropic { epsilon } => entropic(mu, nu, theta, epsilon),
        Method::Auto => {
            let n = mu.len().min(nu.len());
            let (a, b) = (mu.subsample(n), nu.subsample(n));
            if n <= EXACT_SIZE_LIMIT || mu.dim() == 1 {
                Ok(exact(&a, &b, theta))
            } else {
                entropic(&a, &b, theta, None)
            }
        }
    }
}

#[inline]
fn cost(x: &[f64], y: &[f64], theta: f64) -> f64 {
    let d2 = dist_sq(x, y);
    if theta == 2.0 {
        d2
    } else {
        d2.sqrt().powf(theta)
    }
}

fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Vec<f64> {
    let m = nu.len();
    let mut c = vec![0.0; mu.len() * m];
    c.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let x = mu.point(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = cost(x, nu.point(j), theta);
        }
    });
    c
}

fn exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> (f64, TransportPlan) {
    let n = mu.len();
    let perm = if mu.dim() == 1 {
        sorted_matching(mu, nu)
    } else {
        assignment(&cost_matrix(mu, nu, theta), n)
    };
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost(mu.point(i), nu.point(j), theta)).sum();
    ((total / n as f64).powf(1.0 / theta), TransportPlan::Permutation(perm))
}

fn sorted_matching(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<usize> {
    let order = |m: &EmpiricalMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| m.as_flat()[a].total_cmp(&m.as_flat()[b]));
        idx
    };
    let (src, dst) = (order(mu), order(nu));
    let mut perm = vec![0; mu.len()];
    for (s, d) in src.into_iter().zip(dst) {
        perm[s] = d;
    }
    perm
}

/// Minimum-cost perfect matching on a dense `n × n` row-major cost matrix.
///
/// Shortest augmenting path form of the Hungarian method with row/column
/// potentials. Returns `perm` with `perm[row] = column`.
pub fn assignment(costs: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(costs.len(), n * n, "cost matrix is not square");
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free); way[j]: previous column on the path
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &costs[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn median(mut v: Vec<f64>) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

fn entropic(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    theta: f64,
    epsilon: Option<f64>,
) -> Result<(f64, TransportPlan), Error> {
    let (n, m) = (mu.len(), nu.len());
    let c = cost_matrix(mu, nu, theta);
    let eps = match epsilon {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::InvalidArgument(format!("entropic regularization must be positive, got {e}"))),
        None => {
            let med = median(c.clone());
            if med == 0.0 {
                // Over half the pairs coincide; fall back to the mean cost.
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                if mean == 0.0 {
                    let plan = TransportPlan::Coupling {
                        rows: n,
                        cols: m,
                        matrix: vec![1.0 / (n * m) as f64; n * m],
                        epsilon: 0.0,
                        marginal_error: 0.0,
                    };
                    return Ok((0.0, plan));
                }
                DEFAULT_EPS_FRACTION * mean
            } else {
                DEFAULT_EPS_FRACTION * med
            }
        }
    };

    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    // Anneal from the cost scale down to `eps`, warm-starting the potentials.
    let c_max = c.iter().cloned().fold(0.0, f64::max);
    let mut stages = vec![eps];
    while stages.last().is_some_and(|&e| e < c_max) {
        let next = stages.last().unwrap() * ANNEAL_FACTOR;
        stages.push(next);
    }
    stages.reverse();
    let mut violation = f64::INFINITY;
    for (stage, &e) in stages.iter().enumerate() {
        let tol = if stage + 1 == stages.len() { SINKHORN_MARGINAL_TOL } else { ANNEAL_TOL };
        for _ in 0..SINKHORN_MAX_ITER {
            f.par_iter_mut().enumerate().for_each(|(i, fi)| {
                let row = &c[i * m..(i + 1) * m];
                *fi = e * log_a - e * log_sum_exp(row.iter().zip(&g).map(|(cij, gj)| (gj - cij) / e));
            });
            g.par_iter_mut().enumerate().for_each(|(j, gj)| {
                *gj = e * log_b - e * log_sum_exp((0..n).map(|i| (f[i] - c[i * m + j]) / e));
            });
            // Columns are exact after the g-update; check the rows.
            violation = (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = &c[i * m..(i + 1) * m];
                    let s: f64 = row.iter().zip(&g).map(|(cij, gj)| ((f[i] + gj - cij) / e).exp()).sum();
                    (s - 1.0 / n as f64).abs()
                })
                .reduce(|| 0.0, f64::max);
            if violation < tol {
                break;
            }
        }
    }

    let mut matrix = vec![0.0; n * m];
    matrix.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for j in 0..m {
            row[j] = ((f[i] + g[j] - c[i * m + j]) / eps).exp();
        }
    });
    let total: f64 = matrix.iter().zip(&c).map(|(p, cij)| p * cij).sum();
    Ok((total.max(0.0).powf(1.0 / theta), TransportPlan::Coupling { rows: n, cols: m, matrix, epsilon: eps, marginal_error: violation }))
}
