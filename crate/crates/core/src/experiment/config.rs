use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::functions::TestFunction;
use crate::measure::EmpiricalMeasure;
use crate::models::ModelSpec;
use crate::rng::NoiseSpec;
use crate::Error;

const INIT_TAG: u64 = 0x494e_4954;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub sim: SimConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Particles, or trajectories for the Monte Carlo experiments.
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub init: InitSpec,
}

fn default_theta() -> f64 {
    2.0
}

/// Initial law. Gaussian inits built from the same seed share their normal
/// draws, so two Gaussians differing only in the mean are exact shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Gaussian { mean: Vec<f64>, std: f64 },
    Dirac { point: Vec<f64> },
    /// Points from a CSV file with one column per coordinate; relative paths
    /// resolve against the config file.
    Csv { path: PathBuf },
}

impl InitSpec {
    pub fn sample(&self, n: usize, dim: usize, seed: u64, base: &Path) -> Result<EmpiricalMeasure, Error> {
        let check = |len: usize| {
            if len != dim {
                Err(Error::Config(format!("initial law has dimension {len}, model has {dim}")))
            } else {
                Ok(())
            }
        };
        match self {
            InitSpec::Gaussian { mean, std } => {
                check(mean.len())?;
                if !(*std >= 0.0) {
                    return Err(Error::Config(format!("init.std must be nonnegative, got {std}")));
                }
                let noise = NoiseSpec::new(seed, dim).derive(INIT_TAG);
                let mut pts = vec![0.0; n * dim];
                for (i, p) in pts.chunks_exact_mut(dim).enumerate() {
                    noise.fill_standard_normal(i as u64, 0, p);
                    p.iter_mut().zip(mean).for_each(|(v, m)| *v = m + std * *v);
                }
                EmpiricalMeasure::new(dim, pts)
            }
            InitSpec::Dirac { point } => {
                check(point.len())?;
                EmpiricalMeasure::new(dim, point.repeat(n))
            }
            InitSpec::Csv { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let m = EmpiricalMeasure::load(&full)?;
                check(m.dim())?;
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Particle system; writes the paths.
    Simulate {},
    Picard {
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_picard_tol")]
        tol: f64,
        #[serde(default = "one")]
        node_stride: usize,
    },
    Contract {
        nu_init: InitSpec,
        #[serde(default)]
        fit_window: Option<(f64, f64)>,
        /// Allowed excess of the fitted slope over the model's rate.
        #[serde(default = "default_slope_tol")]
        slope_tol: f64,
    },
    Invariant {
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_check_horizon")]
        check_horizon: f64,
        #[serde(default = "default_invariant_tol")]
        tol: f64,
        #[serde(default = "default_doublings")]
        max_doublings: usize,
    },
    Couple {
        nu_init: InitSpec,
        #[serde(default)]
        law_particles: Option<usize>,
    },
    LogHarnack {
        nu_init: InitSpec,
        function: TestFunction,
        #[serde(default)]
        law_particles: Option<usize>,
        /// Replaces `φ(0, T)`.
        #[serde(default)]
        phi: Option<f64>,
    },
    ShiftHarnack {
        function: TestFunction,
        v: Vec<f64>,
        p: f64,
        #[serde(default)]
        law_particles: Option<usize>,
    },
    Ibp {
        function: TestFunction,
        v: Vec<f64>,
        #[serde(default)]
        law_particles: Option<usize>,
    },
    /// Analytic constants of the model on `[0, t_end]`.
    Bounds {
        p: f64,
        /// `|x − y|²` in the power-Harnack factor.
        #[serde(default = "one_f")]
        moment: f64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate {} => "simulate",
            Experiment::Picard { .. } => "picard",
            Experiment::Contract { .. } => "contract",
            Experiment::Invariant { .. } => "invariant",
            Experiment::Couple { .. } => "couple",
            Experiment::LogHarnack { .. } => "log_harnack",
            Experiment::ShiftHarnack { .. } => "shift_harnack",
            Experiment::Ibp { .. } => "ibp",
            Experiment::Bounds { .. } => "bounds",
        }
    }
}

fn default_max_iter() -> usize {
    20
}
fn default_picard_tol() -> f64 {
    1e-6
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_slope_tol() -> f64 {
    0.5
}
fn default_burn_in() -> f64 {
    10.0
}
fn default_check_horizon() -> f64 {
    0.5
}
fn default_invariant_tol() -> f64 {
    0.05
}
fn default_doublings() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("ddsde-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), formats: default_formats() }
    }
}

impl ExperimentConfig {
    /// Parse and validate, naming the offending key on failure.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(with_suggestion(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let s = &self.sim;
        if s.n_particles < 2 {
            return Err(Error::Config(format!("sim.n_particles must be at least 2, got {}", s.n_particles)));
        }
        if !(s.dt > 0.0) || !(s.t_end > 0.0) || s.dt > s.t_end {
            return Err(Error::Config(format!("sim.dt and sim.t_end must satisfy 0 < dt <= t_end, got {} and {}", s.dt, s.t_end)));
        }
        if !(s.theta >= 1.0) {
            return Err(Error::Config(format!("sim.theta must be at least 1, got {}", s.theta)));
        }
        Ok(())
    }
}

/// Append a "did you mean" hint to serde's unknown-field messages.
fn with_suggestion(msg: &str) -> String {
    let Some(rest) = msg.strip_prefix("unknown field `").or_else(|| msg.find("unknown field `").map(|i| &msg[i + 15..])) else {
        return msg.to_string();
    };
    let Some(end) = rest.find('`') else { return msg.to_string() };
    let unknown = &rest[..end];
    let expected: Vec<&str> = rest[end..].split('`').skip(2).step_by(2).collect();
    match expected
        .iter()
        .map(|e| (strsim::jaro_winkler(unknown, e), *e))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
    {
        Some((_, best)) => format!("{msg}; did you mean `{best}`?"),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "model": {"name": "linear_meanfield", "a": 1.0, "c": 0.0, "sigma": [[1.0]]},
        "sim": {"n_particles": 10, "dt": 0.01, "t_end": 0.1, "seed": 1, "init": {"kind": "dirac", "point": [0.0]}},
        "experiment": {"type": "simulate"}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.sim.theta, 2.0);
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.experiment.kind(), "simulate");
    }

    #[test]
    fn misspelled_key_gets_a_suggestion() {
        let bad = BASE.replace("n_particles", "n_partciles");
        let err = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("n_partciles") && err.contains("did you mean `n_particles`"), "{err}");
        let bad = BASE.replace("\"simulate\"}", "\"simulate\", \"extra\": 1}");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_json(&BASE.replace("\"dt\": 0.01", "\"dt\": -1")).is_err());
        assert!(ExperimentConfig::from_json(&BASE.replace("\"n_particles\": 10", "\"n_particles\": 1")).is_err());
    }

    #[test]
    fn gaussian_inits_with_equal_seed_are_shifts() {
        let a = InitSpec::Gaussian { mean: vec![0.0, 0.0], std: 1.0 }.sample(50, 2, 3, Path::new(".")).unwrap();
        let b = InitSpec::Gaussian { mean: vec![1.0, 0.0], std: 1.0 }.sample(50, 2, 3, Path::new(".")).unwrap();
        for (p, q) in a.points().zip(b.points()) {
            assert!((q[0] - p[0] - 1.0).abs() < 1e-12 && q[1] == p[1]);
        }
        assert!(InitSpec::Dirac { point: vec![1.0] }.sample(3, 2, 0, Path::new(".")).is_err());
    }
}
