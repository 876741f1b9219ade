use serde::{Deserialize, Serialize};

use crate::Error;

/// Uniform time grid `start, start + dt, ..., start + n_steps·dt`.
///
/// `step_offset` is the global index of the first step. Noise is keyed by the
/// global index, so a grid obtained from [`TimeGrid::split_at`] continues the
/// same Brownian path as the grid it was split from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub step_offset: u64,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, n_steps: usize) -> Result<Self, Error> {
        if !(start >= 0.0) || !end.is_finite() || n_steps == 0 || !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "time grid needs 0 <= start < end and n_steps >= 1, got [{start}, {end}] with {n_steps} steps"
            )));
        }
        let dt = (end - start) / n_steps as f64;
        Ok(Self { start, dt, n_steps, step_offset: 0 })
    }

    /// Grid on `[start, end]` whose step is as close as possible to `dt`.
    pub fn with_step(start: f64, end: f64, dt: f64) -> Result<Self, Error> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let n = ((end - start) / dt).round().max(1.0) as usize;
        Self::new(start, end, n)
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.node(self.n_steps)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.node(k))
    }

    /// Global noise index of local step `k`.
    #[inline]
    pub fn global_step(&self, k: usize) -> u64 {
        self.step_offset + k as u64
    }

    /// Split into `[start, node(k)]` and `[node(k), end]`, keeping `dt`.
    pub fn split_at(&self, k: usize) -> (TimeGrid, TimeGrid) {
        assert!(k > 0 && k < self.n_steps, "split index {k} outside (0, {})", self.n_steps);
        let head = TimeGrid { n_steps: k, ..*self };
        let tail = TimeGrid {
            start: self.node(k),
            dt: self.dt,
            n_steps: self.n_steps - k,
            step_offset: self.step_offset + k as u64,
        };
        (head, tail)
    }

    /// Same horizon with half the step.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            start: self.start,
            dt: self.dt / 2.0,
            n_steps: self.n_steps * 2,
            step_offset: self.step_offset * 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_exact_multiples() {
        let g = TimeGrid::new(0.5, 1.5, 1000).unwrap();
        assert_eq!(g.dt, 1.0 / 1000.0);
        for k in 0..=g.n_steps {
            assert_eq!(g.node(k), 0.5 + k as f64 * g.dt);
        }
        assert!(g.nodes().zip(g.nodes().skip(1)).all(|(a, b)| b > a));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 1.0, 10).is_err());
        assert!(TimeGrid::with_step(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn split_keeps_step_and_offsets_noise() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let (a, b) = g.split_at(4);
        assert_eq!(a.n_steps, 4);
        assert_eq!(b.n_steps, 6);
        assert_eq!(b.dt, g.dt);
        assert_eq!(b.start, g.node(4));
        assert_eq!(b.global_step(0), 4);
        assert_eq!(g.refined().n_steps, 20);
    }
}
