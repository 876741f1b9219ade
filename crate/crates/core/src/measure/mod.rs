//! Equal-weight empirical measures on ℝ^d and the distances between them.

mod transport;

use std::io::{Read, Write};
use std::path::Path;

pub use transport::{
    assignment, wasserstein, wasserstein_with_plan, Method, TransportPlan, EXACT_SIZE_LIMIT,
};

use crate::Error;

/// `N` points in ℝ^d, each carrying mass `1/N`.
///
/// Points are stored row-major. The mean is computed once at construction
/// because mean-field coefficients read it at every particle and step.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    mean: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::InvalidArgument("measure dimension must be at least 1".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "point buffer of length {} does not hold a nonzero number of {dim}-vectors",
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate in point {} of the measure",
                pos / dim
            )));
        }
        let n = points.len() / dim;
        let mut mean = vec![0.0; dim];
        for p in points.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        Ok(Self { dim, points, mean })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn dirac(point: &[f64]) -> Result<Self, Error> {
        Self::new(point.len(), point.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    /// Translate every point by `shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self, Error> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: shift.len() });
        }
        let pts = self
            .points()
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, pts)
    }

    /// Deterministic strided subsample of `n` points (the whole measure when `n >= len`).
    pub fn subsample(&self, n: usize) -> Self {
        let len = self.len();
        if n >= len || n == 0 {
            return self.clone();
        }
        let pts = (0..n)
            .flat_map(|i| self.point(i * len / n).to_vec())
            .collect();
        Self::new(self.dim, pts).expect("subsample of a valid measure")
    }

    /// p-th absolute moment `(1/N) Σ |x_i|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        assert!(p >= 0.0, "moment order must be nonnegative");
        let s: f64 = self.points().map(|x| norm(x).powf(p)).sum();
        s / self.len() as f64
    }

    /// `(f * μ)(x) = (1/N) Σ f(x − z_i)`, for `f` with `out_len` outputs.
    ///
    /// `f` receives `x − z_i` and writes its value into the provided buffer.
    pub fn convolve<F>(&self, x: &[f64], out_len: usize, f: F) -> Vec<f64>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        assert_eq!(x.len(), self.dim, "convolution point has wrong dimension");
        let mut acc = vec![0.0; out_len];
        let mut diff = vec![0.0; self.dim];
        let mut val = vec![0.0; out_len];
        for z in self.points() {
            for ((d, a), b) in diff.iter_mut().zip(x).zip(z) {
                *d = a - b;
            }
            f(&diff, &mut val);
            for (a, v) in acc.iter_mut().zip(&val) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Read a headerless CSV, one point per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, Error> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut dim = None;
        let mut pts = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            match dim {
                None => dim = Some(rec.len()),
                Some(d) if d != rec.len() => {
                    return Err(Error::DimensionMismatch { expected: d, found: rec.len() })
                }
                _ => {}
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidArgument(format!("row {row}: cannot parse {field:?} as a number"))
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("row {row}: non-finite coordinate")));
                }
                pts.push(v);
            }
        }
        Self::new(dim.unwrap_or(0), pts)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), Error> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for p in self.points() {
            wtr.write_record(p.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
