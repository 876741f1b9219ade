//! JSON-configured batch runs: one experiment per config file, a JSON
//! report plus CSV time series in the output directory.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{Experiment, ExperimentConfig, Format, InitSpec, OutputConfig, SimConfig};

use crate::grid::TimeGrid;
use crate::harnack::{
    coupled_girsanov, density_bound_rhs, entropy_bound, integration_by_parts_check, pair_initials, power_harnack_constant,
    power_threshold, shift_coupling_verify, total_variation_bound, verify_log_harnack, CouplingConfig, CouplingOptions,
    DensityBound, ShiftOptions,
};
use crate::measure::EmpiricalMeasure;
use crate::models::{contraction_exponent_cc, CoefficientModel, ModelSpec};
use crate::rng::NoiseSpec;
use crate::solver::{estimate_contraction, find_invariant, particle_solve, picard_solve, InvariantOptions, PicardOptions};
use crate::Error;

/// Overrides the output block of every config.
pub const OUTPUT_DIR_ENV: &str = "DDSDE_OUTPUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` keeps the global pool.
    pub threads: Option<usize>,
    /// Repeat the experiment at `dt / 2` and attach its metrics.
    pub refine: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub config: Value,
    /// SHA-256 of `"blob <len>\0" + config bytes`.
    pub config_hash: String,
    pub model: Value,
    pub metrics: Value,
    /// `None` for experiments without a pass/fail criterion.
    pub verified: Option<bool>,
    pub refinement: Option<Value>,
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

pub fn config_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_f64s(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Load `path`, run its experiment and write `report.json` (and CSV series)
/// to the output directory.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunReport, Error> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let body = || run_config(&cfg, &base, &out_dir, opts.refine);
    let started = Instant::now();
    let (metrics, verified, refinement, files) = match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(body)?,
        None => body()?,
    };
    let report = RunReport {
        experiment: cfg.experiment.kind().to_string(),
        config: serde_json::to_value(&cfg)?,
        config_hash: config_hash(&bytes),
        model: cfg.model.build()?.describe(),
        metrics,
        verified,
        refinement,
        files,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if cfg.output.formats.contains(&Format::Json) {
        std::fs::create_dir_all(&out_dir)?;
        std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

type Outcome = (Value, Option<bool>, Option<Value>, Vec<String>);

fn run_config(cfg: &ExperimentConfig, base: &Path, out_dir: &Path, refine: bool) -> Result<Outcome, Error> {
    let model = cfg.model.build()?;
    let csv = cfg.output.formats.contains(&Format::Csv);
    if csv {
        std::fs::create_dir_all(out_dir)?;
    }
    let mut files = Vec::new();
    let primary = execute(cfg, model.as_ref(), cfg.sim.dt, base, csv.then_some(out_dir), &mut files)?;
    let refinement = if refine {
        let companion = execute(cfg, model.as_ref(), cfg.sim.dt / 2.0, base, None, &mut Vec::new())?;
        let mut value = json!({ "dt": cfg.sim.dt / 2.0, "metrics": companion.metrics, "verified": companion.verified });
        if let (Some(a), Some(b)) = (primary.metrics.get("terminal_gap_q"), companion.metrics.get("terminal_gap_q")) {
            if let (Some(a), Some(b)) = (a.as_f64(), b.as_f64()) {
                value["gap_ratio"] = json!(a / b);
            }
        }
        Some(value)
    } else {
        None
    };
    Ok((primary.metrics, primary.verified, refinement, files))
}

struct Executed {
    metrics: Value,
    verified: Option<bool>,
}

fn csv_writer(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<csv::Writer<BufWriter<File>>, Error> {
    files.push(name.to_string());
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn grid_for(sim: &SimConfig, dt: f64) -> Result<TimeGrid, Error> {
    TimeGrid::with_step(0.0, sim.t_end, dt)
}

fn execute(
    cfg: &ExperimentConfig,
    model: &dyn CoefficientModel,
    dt: f64,
    base: &Path,
    csv_dir: Option<&Path>,
    files: &mut Vec<String>,
) -> Result<Executed, Error> {
    let sim = &cfg.sim;
    let d = model.dim();
    let n = sim.n_particles;
    let noise = NoiseSpec::new(sim.seed, d);
    let mu0 = sim.init.sample(n, d, sim.seed, base)?;
    let grid = grid_for(sim, dt)?;
    let law_n = |lp: &Option<usize>| lp.unwrap_or(n.min(2000));
    let (metrics, verified) = match &cfg.experiment {
        Experiment::Simulate {} => {
            let (_, ens) = particle_solve(model, &mu0, &grid, &noise, n)?;
            if let Some(dir) = csv_dir {
                files.push("paths.csv".into());
                ens.write_csv(BufWriter::new(File::create(dir.join("paths.csv"))?))?;
            }
            let terminal = ens.terminal();
            let metrics = json!({
                "terminal_mean": terminal.mean(),
                "terminal_second_moment": terminal.moment(2.0),
                "paths_sha256": hash_f64s(ens.fingerprint().into_iter().map(f64::from_bits)),
            });
            (metrics, None)
        }
        Experiment::Picard { max_iter, tol, node_stride } => {
            let opts = PicardOptions { max_iter: *max_iter, tol: *tol, theta: sim.theta, node_stride: *node_stride, ..Default::default() };
            let report = picard_solve(model, &mu0, &grid, &noise, &opts)?;
            if let Some(dir) = csv_dir {
                let mut w = csv_writer(dir, "picard.csv", files)?;
                w.write_record(["iteration", "delta"])?;
                for (i, delta) in report.deltas.iter().enumerate() {
                    w.write_record([(i + 1).to_string(), delta.to_string()])?;
                }
                w.flush()?;
            }
            let terminal = report.solution().terminal();
            let metrics = json!({
                "deltas": report.deltas,
                "delta_ratios": report.delta_ratios(),
                "converged": report.converged,
                "iterations_used": report.iterations_used,
                "geometric_bound_applicable": report.geometric_bound_applicable,
                "terminal_mean": terminal.mean(),
            });
            (metrics, Some(report.converged))
        }
        Experiment::Contract { nu_init, fit_window, slope_tol } => {
            let nu0 = nu_init.sample(n, d, sim.seed, base)?;
            let report = estimate_contraction(model, &mu0, &nu0, &grid, &noise, *fit_window)?;
            if let Some(dir) = csv_dir {
                let mut w = csv_writer(dir, "contract.csv", files)?;
                w.write_record(["t", "w2_sq", "bound_envelope"])?;
                for (k, t) in report.times.iter().enumerate() {
                    let env = report.envelope.as_ref().map(|e| e[k].to_string()).unwrap_or_default();
                    w.write_record([t.to_string(), report.w2_sq[k].to_string(), env])?;
                }
                w.flush()?;
            }
            let verified = report.bound_rate.map(|r| report.empirical_rate <= r + slope_tol);
            let metrics = json!({
                "empirical_rate": finite_or_string(report.empirical_rate),
                "bound_rate": report.bound_rate,
                "merge_time": report.merge_time,
                "fit_window": report.fit_window,
                "initial_w2_sq": report.w2_sq[0],
                "terminal_w2_sq": report.w2_sq.last(),
            });
            (metrics, verified)
        }
        Experiment::Invariant { burn_in, check_horizon, tol, max_doublings } => {
            let opts = InvariantOptions {
                dt,
                n_particles: n,
                burn_in: *burn_in,
                check_horizon: *check_horizon,
                tol: *tol,
                theta: sim.theta,
                max_doublings: *max_doublings,
            };
            let report = find_invariant(model, &mu0, &noise, &opts)?;
            if let Some(dir) = csv_dir {
                files.push("invariant.csv".into());
                report.measure.save(&dir.join("invariant.csv"))?;
            }
            let metrics = json!({
                "residual": report.residual,
                "burn_ins": report.burn_ins,
                "residuals": report.residuals,
                "coordinate_second_moments": report.coordinate_second_moments(),
            });
            (metrics, Some(report.success))
        }
        Experiment::Couple { nu_init, law_particles } => {
            let nu0 = nu_init.sample(n, d, sim.seed, base)?;
            let config = CouplingConfig::from_bounds(&model.bounds(), sim.t_end)?;
            let (x0, y0) = pair_initials(&mu0, &nu0)?;
            let opts = CouplingOptions { law_particles: law_n(law_particles) };
            let run = coupled_girsanov(model, &x0, &y0, &config, &grid, &noise, &opts)?;
            if let Some(dir) = csv_dir {
                let mut w = csv_writer(dir, "couple.csv", files)?;
                w.write_record(["t", "gap_q", "weight_mean", "weight_entropy"])?;
                for (k, t) in run.times.iter().enumerate() {
                    w.write_record([
                        t.to_string(),
                        run.gap_q[k].to_string(),
                        run.weight_mean[k].to_string(),
                        run.weight_entropy[k].to_string(),
                    ])?;
                }
                w.flush()?;
            }
            let mut metrics = serde_json::to_value(run.result)?;
            metrics["initial_cost"] = json!(run.initial_cost);
            metrics["phi"] = json!(run.phi);
            metrics["low_ess"] = json!(run.low_ess);
            (metrics, Some(run.result.success))
        }
        Experiment::LogHarnack { nu_init, function, law_particles, phi } => {
            let nu0 = nu_init.sample(n, d, sim.seed, base)?;
            let config = CouplingConfig::from_bounds(&model.bounds(), sim.t_end)?;
            let opts = CouplingOptions { law_particles: law_n(law_particles) };
            let check = verify_log_harnack(model, function, &mu0, &nu0, &config, &grid, &noise, &opts, *phi)?;
            (serde_json::to_value(check)?, Some(!check.violated))
        }
        Experiment::ShiftHarnack { function, v, p, law_particles } => {
            let opts = ShiftOptions { n_paths: n, law_particles: law_n(law_particles) };
            let check = shift_coupling_verify(model, function, v, &mu0, *p, &grid, &noise, &opts)?;
            (serde_json::to_value(check)?, Some(!check.violated))
        }
        Experiment::Ibp { function, v, law_particles } => {
            let opts = ShiftOptions { n_paths: n, law_particles: law_n(law_particles) };
            let check = integration_by_parts_check(model, function, v, &mu0, &grid, &noise, &opts)?;
            (serde_json::to_value(check)?, Some(check.z_score.abs() <= 3.0))
        }
        Experiment::Bounds { p, moment } => (bounds_metrics(&cfg.model, model, sim.t_end, *p, *moment)?, None),
    };
    Ok(Executed { metrics, verified })
}

fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn bounds_metrics(spec: &ModelSpec, model: &dyn CoefficientModel, t: f64, p: f64, moment: f64) -> Result<Value, Error> {
    let b = model.bounds();
    let mut out = json!({ "bounds": b, "contraction_rate": b.contraction_rate() });
    if let ModelSpec::Landau { alpha, beta, gamma: g, .. } = spec {
        if *g == 0.0 {
            out["contraction_exponent_cc"] = json!(contraction_exponent_cc(*alpha, *beta));
        }
    }
    if let Ok(config) = CouplingConfig::from_bounds(&b, t) {
        out["phi"] = json!(config.phi(0.0, t)?);
        out["entropy_bound_unit_w2"] = json!(entropy_bound(&config, 0.0, t, 1.0)?);
        out["total_variation_bound_unit_w2"] = json!(total_variation_bound(&config, 0.0, t, 1.0)?);
        if let Some(g) = config.gamma_t {
            out["power_threshold"] = json!(power_threshold(config.lambda, g));
            if let Ok(c) = power_harnack_constant(p, 0.0, t, &config, moment) {
                out["power_harnack_constant"] = json!(c);
            }
        }
        if let Some(gb) = b.grad_b_sup {
            let lam = config.lambda;
            let (l, g) = (move |_: f64| lam, move |_: f64| gb);
            for (kind, key) in [(DensityBound::Et1, "et1"), (DensityBound::Et2, "et2"), (DensityBound::Et3, "et3")] {
                if let Ok(v) = density_bound_rhs(kind, p, 0.0, t, &l, &g, model.dim()) {
                    out[key] = json!(v);
                }
            }
        }
    }
    Ok(out)
}

/// Sample `spec` as the experiment runner would.
pub fn sample_init(spec: &InitSpec, n: usize, dim: usize, seed: u64) -> Result<EmpiricalMeasure, Error> {
    spec.sample(n, dim, seed, Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, experiment: &str) -> PathBuf {
        let text = format!(
            r#"{{
                "model": {{"name": "linear_meanfield", "a": 1.0, "c": 0.25, "sigma": [[1.0]]}},
                "sim": {{"n_particles": 64, "dt": 0.02, "t_end": 0.4, "seed": 9,
                         "init": {{"kind": "gaussian", "mean": [0.0], "std": 1.0}}}},
                "experiment": {experiment}
            }}"#
        );
        let path = dir.join("cfg.json");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn hash_is_git_style() {
        // sha256 of "blob 0\0"
        assert_eq!(config_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }

    #[test]
    fn every_experiment_type_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let experiments = [
            r#"{"type": "simulate"}"#,
            r#"{"type": "picard", "max_iter": 4}"#,
            r#"{"type": "contract", "nu_init": {"kind": "gaussian", "mean": [1.0], "std": 1.0}}"#,
            r#"{"type": "couple", "nu_init": {"kind": "gaussian", "mean": [0.5], "std": 1.0}}"#,
            r#"{"type": "log_harnack", "nu_init": {"kind": "gaussian", "mean": [0.5], "std": 1.0}, "function": {"kind": "two_plus_sin"}}"#,
            r#"{"type": "shift_harnack", "function": {"kind": "one_plus_tanh"}, "v": [0.5], "p": 2.0}"#,
            r#"{"type": "ibp", "function": {"kind": "sin"}, "v": [1.0]}"#,
            r#"{"type": "bounds", "p": 2.0}"#,
        ];
        for e in experiments {
            let path = write_config(tmp.path(), e);
            let out = tmp.path().join("out");
            let opts = RunOptions { threads: Some(1), refine: false, output_dir: Some(out.clone()) };
            let report = run(&path, &opts).unwrap_or_else(|err| panic!("{e}: {err}"));
            assert!(out.join("report.json").exists());
            for f in &report.files {
                assert!(out.join(f).exists(), "{f}");
            }
        }
    }

    #[test]
    fn contract_csv_columns() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), r#"{"type": "contract", "nu_init": {"kind": "dirac", "point": [2.0]}}"#);
        let out = tmp.path().join("o");
        run(&path, &RunOptions { output_dir: Some(out.clone()), ..Default::default() }).unwrap();
        let text = std::fs::read_to_string(out.join("contract.csv")).unwrap();
        assert!(text.starts_with("t,w2_sq,bound_envelope\n"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn refinement_is_attached() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), r#"{"type": "couple", "nu_init": {"kind": "gaussian", "mean": [1.0], "std": 1.0}}"#);
        let opts = RunOptions { refine: true, output_dir: Some(tmp.path().join("o")), ..Default::default() };
        let report = run(&path, &opts).unwrap();
        let r = report.refinement.unwrap();
        assert_eq!(r["dt"], json!(0.01));
        assert!(r["gap_ratio"].as_f64().unwrap() > 1.0);
    }
}
