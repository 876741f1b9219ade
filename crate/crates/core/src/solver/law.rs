use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::measure::{wasserstein, EmpiricalMeasure, Method};
use crate::sde::PathEnsemble;
use crate::Error;

/// A time grid with one empirical measure per node.
///
/// Measures are reference counted so constant curves and curves built from a
/// running particle system share storage with their producer.
#[derive(Debug, Clone, PartialEq)]
pub struct LawCurve {
    grid: TimeGrid,
    measures: Vec<Arc<EmpiricalMeasure>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    grid: TimeGrid,
    theta: f64,
    dim: usize,
    n_points: usize,
    files: Vec<String>,
    model: serde_json::Value,
}

impl LawCurve {
    pub fn new(grid: TimeGrid, measures: Vec<Arc<EmpiricalMeasure>>) -> Result<Self, Error> {
        if measures.len() != grid.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "law curve needs {} measures for its grid, got {}",
                grid.n_nodes(),
                measures.len()
            )));
        }
        let d = measures[0].dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
        Ok(Self { grid, measures })
    }

    /// `t ↦ μ` for every node.
    pub fn constant(grid: TimeGrid, mu: EmpiricalMeasure) -> Self {
        let mu = Arc::new(mu);
        Self { grid, measures: vec![mu; grid.n_nodes()] }
    }

    pub fn from_ensemble(ensemble: &PathEnsemble) -> Self {
        let measures = (0..ensemble.grid().n_nodes()).map(|k| Arc::new(ensemble.measure_at(k))).collect();
        Self { grid: *ensemble.grid(), measures }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    #[inline]
    pub fn at(&self, k: usize) -> &EmpiricalMeasure {
        &self.measures[k]
    }

    pub fn initial(&self) -> &EmpiricalMeasure {
        &self.measures[0]
    }

    pub fn terminal(&self) -> &EmpiricalMeasure {
        self.measures.last().expect("law curves are nonempty")
    }

    /// The curve restricted to nodes `k..`, on the tail grid of [`TimeGrid::split_at`].
    pub fn tail(&self, k: usize) -> LawCurve {
        let (_, tail) = self.grid.split_at(k);
        Self { grid: tail, measures: self.measures[k..].to_vec() }
    }

    /// Every node measure reduced to `n` points by strided subsampling.
    pub fn subsampled(&self, n: usize) -> LawCurve {
        let measures = self.measures.iter().map(|m| Arc::new(m.subsample(n))).collect();
        Self { grid: self.grid, measures }
    }

    /// Mean of each node measure.
    pub fn mean_curve(&self) -> Vec<Vec<f64>> {
        self.measures.iter().map(|m| m.mean().to_vec()).collect()
    }

    /// `p`-th moment of each node measure.
    pub fn moment_curve(&self, p: f64) -> Vec<f64> {
        self.measures.iter().map(|m| m.moment(p)).collect()
    }

    /// The curve can drive a simulation on `grid`: same start and step, at
    /// least as many nodes.
    pub fn check_covers(&self, grid: &TimeGrid, dim: usize) -> Result<(), Error> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.dim() });
        }
        let same_step = (self.grid.dt - grid.dt).abs() <= 1e-12 * grid.dt;
        let same_start = (self.grid.start - grid.start).abs() <= 1e-12 * (1.0 + grid.start.abs());
        if !same_step || !same_start || self.len() < grid.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "law curve on [{}, {}] with dt {} does not cover the grid [{}, {}] with dt {}",
                self.grid.start,
                self.grid.end(),
                self.grid.dt,
                grid.start,
                grid.end(),
                grid.dt
            )));
        }
        Ok(())
    }

    /// `max_k W_θ(self_k, other_k)` over nodes `0, stride, 2·stride, …` and the last node.
    pub fn sup_distance(&self, other: &LawCurve, theta: f64, method: Method, stride: usize) -> Result<f64, Error> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument("law curves have different node counts".into()));
        }
        let stride = stride.max(1);
        let last = self.len() - 1;
        let mut nodes: Vec<usize> = (0..=last).step_by(stride).collect();
        if *nodes.last().unwrap() != last {
            nodes.push(last);
        }
        let mut sup = 0.0f64;
        for k in nodes {
            if Arc::ptr_eq(&self.measures[k], &other.measures[k]) {
                continue;
            }
            sup = sup.max(wasserstein(self.at(k), other.at(k), theta, method)?);
        }
        Ok(sup)
    }

    /// Write `node_00000.csv, …` plus `manifest.json` into `dir`.
    pub fn export(&self, dir: &Path, theta: f64, model: serde_json::Value) -> Result<(), Error> {
        std::fs::create_dir_all(dir)?;
        let width = self.len().to_string().len().max(5);
        let mut files = Vec::with_capacity(self.len());
        for (k, m) in self.measures.iter().enumerate() {
            let name = format!("node_{k:0width$}.csv");
            m.save(&dir.join(&name))?;
            files.push(name);
        }
        let manifest = Manifest { grid: self.grid, theta, dim: self.dim(), n_points: self.at(0).len(), files, model };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, Error> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let measures = manifest
            .files
            .iter()
            .map(|f| EmpiricalMeasure::load(&dir.join(f)).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(manifest.grid, measures)
    }
}
