//! Test functions `f: ℝ^d → ℝ` for the Harnack and integration-by-parts checks.

use serde::{Deserialize, Serialize};

use crate::Error;

/// Observables with closed-form gradients. Coordinates are zero-based
/// (`x[0]` is the first coordinate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant { value: f64 },
    /// `⟨u, x⟩`
    Linear { u: Vec<f64> },
    /// `exp⟨u, x⟩`
    ExpLinear { u: Vec<f64> },
    /// `sin(x[0])`
    Sin,
    /// `1 + tanh(x[0])`
    OnePlusTanh,
    /// `2 + sin(x[0])`
    TwoPlusSin,
    /// `1 + exp(−|x|²)`
    OnePlusGaussian,
    /// `0.1 + 1/(1 + |x|²)`
    InverseQuadratic,
    /// `0.1 + 1/(1 + exp(−x[0]))`
    Logistic,
    /// `height · exp(−|x − center|² / (2 width²))`
    GaussianBump { center: Vec<f64>, width: f64, height: f64 },
}

impl TestFunction {
    /// The five bounded positive functions bundled for the log-Harnack check.
    pub fn bundled_positive() -> Vec<TestFunction> {
        vec![
            TestFunction::OnePlusTanh,
            TestFunction::TwoPlusSin,
            TestFunction::OnePlusGaussian,
            TestFunction::InverseQuadratic,
            TestFunction::Logistic,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Linear { .. } => "linear",
            TestFunction::ExpLinear { .. } => "exp_linear",
            TestFunction::Sin => "sin",
            TestFunction::OnePlusTanh => "one_plus_tanh",
            TestFunction::TwoPlusSin => "two_plus_sin",
            TestFunction::OnePlusGaussian => "one_plus_gaussian",
            TestFunction::InverseQuadratic => "inverse_quadratic",
            TestFunction::Logistic => "logistic",
            TestFunction::GaussianBump { .. } => "gaussian_bump",
        }
    }

    /// Checks that vector parameters match `dim`.
    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        let check = |v: &[f64]| {
            if v.len() != dim {
                Err(Error::DimensionMismatch { expected: dim, found: v.len() })
            } else {
                Ok(())
            }
        };
        match self {
            TestFunction::Linear { u } | TestFunction::ExpLinear { u } => check(u),
            TestFunction::GaussianBump { center, width, height } => {
                check(center)?;
                if !(*width > 0.0) || !(*height > 0.0) {
                    return Err(Error::InvalidArgument("gaussian bump needs positive width and height".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// A positive lower bound on ℝ^d when one exists.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            TestFunction::Constant { value } if *value > 0.0 => Some(*value),
            TestFunction::ExpLinear { u } if u.iter().all(|&v| v == 0.0) => Some(1.0),
            TestFunction::TwoPlusSin | TestFunction::OnePlusGaussian => Some(1.0),
            TestFunction::InverseQuadratic | TestFunction::Logistic => Some(0.1),
            // 1 + tanh is positive but not bounded away from 0 on ℝ
            _ => None,
        }
    }

    /// Positive everywhere, so `log f` is defined.
    pub fn is_positive(&self) -> bool {
        match self {
            TestFunction::Constant { value } => *value > 0.0,
            TestFunction::Linear { .. } | TestFunction::Sin => false,
            _ => true,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let sq = || x.iter().map(|v| v * v).sum::<f64>();
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Linear { u } => dot(u, x),
            TestFunction::ExpLinear { u } => dot(u, x).exp(),
            TestFunction::Sin => x[0].sin(),
            TestFunction::OnePlusTanh => 1.0 + x[0].tanh(),
            TestFunction::TwoPlusSin => 2.0 + x[0].sin(),
            TestFunction::OnePlusGaussian => 1.0 + (-sq()).exp(),
            TestFunction::InverseQuadratic => 0.1 + 1.0 / (1.0 + sq()),
            TestFunction::Logistic => 0.1 + 1.0 / (1.0 + (-x[0]).exp()),
            TestFunction::GaussianBump { center, width, height } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                height * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    /// `log f(x)`, evaluated without overflow for the exponential families.
    pub fn log_value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::ExpLinear { u } => dot(u, x),
            TestFunction::GaussianBump { center, width, height } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                height.ln() - r2 / (2.0 * width * width)
            }
            _ => self.value(x).ln(),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let sq = || x.iter().map(|v| v * v).sum::<f64>();
        match self {
            TestFunction::Constant { .. } => {}
            TestFunction::Linear { u } => out.copy_from_slice(u),
            TestFunction::ExpLinear { u } => {
                let e = dot(u, x).exp();
                out.iter_mut().zip(u).for_each(|(o, ui)| *o = ui * e);
            }
            TestFunction::Sin | TestFunction::TwoPlusSin => out[0] = x[0].cos(),
            TestFunction::OnePlusTanh => {
                let t = x[0].tanh();
                out[0] = 1.0 - t * t;
            }
            TestFunction::OnePlusGaussian => {
                let e = (-sq()).exp();
                out.iter_mut().zip(x).for_each(|(o, xi)| *o = -2.0 * xi * e);
            }
            TestFunction::InverseQuadratic => {
                let q = 1.0 + sq();
                out.iter_mut().zip(x).for_each(|(o, xi)| *o = -2.0 * xi / (q * q));
            }
            TestFunction::Logistic => {
                let s = 1.0 / (1.0 + (-x[0]).exp());
                out[0] = s * (1.0 - s);
            }
            TestFunction::GaussianBump { center, width, .. } => {
                let f = self.value(x);
                let w2 = width * width;
                out.iter_mut().zip(x.iter().zip(center)).for_each(|(o, (a, c))| *o = -(a - c) / w2 * f);
            }
        }
    }

    /// `∇_v f(x)`.
    pub fn directional_derivative(&self, x: &[f64], v: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        dot(&g, v)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
