//! Python bindings: `import ddsde`.
//!
//! Points cross the boundary as lists of coordinate lists; structured results
//! come back as dicts.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ddsde_core::experiment::{run, RunOptions};
use ddsde_core::functions::TestFunction;
use ddsde_core::harnack::{
    self, density_bound_rhs, integration_by_parts_check, shift_coupling_verify, verify_log_harnack, CouplingConfig,
    CouplingOptions, DensityBound, ShiftOptions,
};
use ddsde_core::models::{self, ModelSpec};
use ddsde_core::solver::{estimate_contraction, particle_solve, picard_solve, PicardOptions};
use ddsde_core::{CoefficientModel, EmpiricalMeasure, Error, Method, NoiseSpec, TimeGrid};

fn to_py(err: Error) -> PyErr {
    if err.is_numerical_abort() {
        PyRuntimeError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn measure(rows: Vec<Vec<f64>>) -> PyResult<EmpiricalMeasure> {
    EmpiricalMeasure::from_rows(&rows).map_err(to_py)
}

fn method(name: &str, epsilon: Option<f64>) -> PyResult<Method> {
    match name {
        "auto" => Ok(Method::Auto),
        "exact" => Ok(Method::Exact),
        "entropic" => Ok(Method::Entropic { epsilon }),
        other => Err(PyValueError::new_err(format!("unknown method `{other}`; expected auto, exact or entropic"))),
    }
}

fn grid(t_end: f64, dt: f64) -> PyResult<TimeGrid> {
    TimeGrid::with_step(0.0, t_end, dt).map_err(to_py)
}

/// Equal-weight empirical measure.
#[pyclass(name = "Measure", frozen)]
struct PyMeasure {
    inner: EmpiricalMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: measure(points)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    fn moment(&self, p: f64) -> f64 {
        self.inner.moment(p)
    }

    #[pyo3(signature = (other, theta = 2.0, method = "auto", epsilon = None))]
    fn wasserstein(&self, other: &PyMeasure, theta: f64, method: &str, epsilon: Option<f64>) -> PyResult<f64> {
        ddsde_core::wasserstein(&self.inner, &other.inner, theta, self::method(method, epsilon)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Measure(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// A coefficient model, built from the same spec as the `model` block of a config.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    spec: ModelSpec,
    inner: Arc<dyn CoefficientModel>,
}

impl PyModel {
    fn build(spec: ModelSpec) -> PyResult<Self> {
        let inner: Arc<dyn CoefficientModel> = spec.build().map_err(to_py)?.into();
        Ok(Self { spec, inner })
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (gamma, alpha, beta, state_radius = None))]
    fn landau(gamma: f64, alpha: f64, beta: f64, state_radius: Option<f64>) -> PyResult<Self> {
        Self::build(ModelSpec::Landau { gamma, alpha, beta, state_radius })
    }

    #[staticmethod]
    fn linear(a: f64, c: f64, sigma: Vec<Vec<f64>>) -> PyResult<Self> {
        Self::build(ModelSpec::LinearMeanfield { a, c, sigma })
    }

    /// Build from a dict such as `{"name": "landau", "gamma": 0, "alpha": 1, "beta": 1}`.
    #[staticmethod]
    fn from_spec(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        Self::build(py_to_json(spec)?)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[pyo3(signature = (x, mu, t = 0.0))]
    fn drift(&self, x: Vec<f64>, mu: &PyMeasure, t: f64) -> PyResult<Vec<f64>> {
        self.check(&x, &mu.inner)?;
        let mut out = vec![0.0; self.inner.dim()];
        self.inner.drift(t, &x, &mu.inner, &mut out);
        Ok(out)
    }

    /// Row-major `d × d` as nested lists.
    #[pyo3(signature = (x, mu, t = 0.0))]
    fn diffusion(&self, x: Vec<f64>, mu: &PyMeasure, t: f64) -> PyResult<Vec<Vec<f64>>> {
        self.check(&x, &mu.inner)?;
        let d = self.inner.dim();
        let mut out = vec![0.0; d * d];
        self.inner.diffusion(t, &x, &mu.inner, &mut out);
        Ok(out.chunks(d).map(<[f64]>::to_vec).collect())
    }

    fn flags<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.flags())
    }

    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.bounds())
    }

    fn describe<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.describe())
    }

    fn spec<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.spec)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", serde_json::to_string(&self.spec).unwrap_or_default())
    }
}

impl PyModel {
    fn check(&self, x: &[f64], mu: &EmpiricalMeasure) -> PyResult<()> {
        let d = self.inner.dim();
        if x.len() != d || mu.dim() != d {
            return Err(to_py(Error::DimensionMismatch { expected: d, found: if x.len() != d { x.len() } else { mu.dim() } }));
        }
        Ok(())
    }
}

#[pyfunction]
#[pyo3(signature = (mu, nu, theta = 2.0, method = "auto", epsilon = None))]
fn wasserstein(mu: Vec<Vec<f64>>, nu: Vec<Vec<f64>>, theta: f64, method: &str, epsilon: Option<f64>) -> PyResult<f64> {
    ddsde_core::wasserstein(&measure(mu)?, &measure(nu)?, theta, self::method(method, epsilon)?).map_err(to_py)
}

/// Interacting particle system. Returns the node times, the mean curve and
/// the terminal particles.
#[pyfunction]
#[pyo3(signature = (model, init, t_end, dt, seed, n_particles = None))]
fn simulate<'py>(
    py: Python<'py>,
    model: &PyModel,
    init: Vec<Vec<f64>>,
    t_end: f64,
    dt: f64,
    seed: u64,
    n_particles: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mu0 = measure(init)?;
    let g = grid(t_end, dt)?;
    let n = n_particles.unwrap_or(mu0.len());
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let inner = model.inner.clone();
    let (law, _) = py.detach(|| particle_solve(inner.as_ref(), &mu0, &g, &noise, n)).map_err(to_py)?;
    let out = serde_json::json!({
        "times": g.nodes().collect::<Vec<_>>(),
        "mean": law.mean_curve(),
        "terminal": law.terminal().to_rows(),
    });
    json_to_py(py, &out)
}

/// Picard iteration in law with shared noise.
#[pyfunction]
#[pyo3(signature = (model, init, t_end, dt, seed, max_iter = 20, tol = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn picard<'py>(
    py: Python<'py>,
    model: &PyModel,
    init: Vec<Vec<f64>>,
    t_end: f64,
    dt: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mu0 = measure(init)?;
    let g = grid(t_end, dt)?;
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let opts = PicardOptions { max_iter, tol, ..PicardOptions::default() };
    let inner = model.inner.clone();
    let report = py.detach(|| picard_solve(inner.as_ref(), &mu0, &g, &noise, &opts)).map_err(to_py)?;
    let out = serde_json::json!({
        "deltas": report.deltas,
        "ratios": report.delta_ratios(),
        "converged": report.converged,
        "iterations": report.iterations_used,
        "terminal": report.solution().terminal().to_rows(),
    });
    json_to_py(py, &out)
}

/// Synchronous coupling of two particle systems; the report includes the fitted rate.
#[pyfunction]
#[pyo3(signature = (model, mu0, nu0, t_end, dt, seed))]
fn contraction<'py>(
    py: Python<'py>,
    model: &PyModel,
    mu0: Vec<Vec<f64>>,
    nu0: Vec<Vec<f64>>,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (mu0, nu0) = (measure(mu0)?, measure(nu0)?);
    let g = grid(t_end, dt)?;
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let inner = model.inner.clone();
    let report = py.detach(|| estimate_contraction(inner.as_ref(), &mu0, &nu0, &g, &noise, None)).map_err(to_py)?;
    json_to_py(py, &report)
}

/// Log-Harnack check; `function` is a dict like `{"kind": "two_plus_sin"}`.
#[pyfunction]
#[pyo3(signature = (model, function, mu0, nu0, t_end, dt, seed, law_particles = 2000, phi = None))]
#[allow(clippy::too_many_arguments)]
fn log_harnack<'py>(
    py: Python<'py>,
    model: &PyModel,
    function: &Bound<'py, PyAny>,
    mu0: Vec<Vec<f64>>,
    nu0: Vec<Vec<f64>>,
    t_end: f64,
    dt: f64,
    seed: u64,
    law_particles: usize,
    phi: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let f: TestFunction = py_to_json(function)?;
    let (mu0, nu0) = (measure(mu0)?, measure(nu0)?);
    let g = grid(t_end, dt)?;
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let cfg = CouplingConfig::from_bounds(&model.inner.bounds(), t_end).map_err(to_py)?;
    let inner = model.inner.clone();
    let check = py
        .detach(|| verify_log_harnack(inner.as_ref(), &f, &mu0, &nu0, &cfg, &g, &noise, &CouplingOptions { law_particles }, phi))
        .map_err(to_py)?;
    json_to_py(py, &check)
}

/// Shift-Harnack check with power `p`.
#[pyfunction]
#[pyo3(signature = (model, function, v, mu0, p, t_end, dt, seed, n_paths = 10_000, law_particles = 2000))]
#[allow(clippy::too_many_arguments)]
fn shift_harnack<'py>(
    py: Python<'py>,
    model: &PyModel,
    function: &Bound<'py, PyAny>,
    v: Vec<f64>,
    mu0: Vec<Vec<f64>>,
    p: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
    n_paths: usize,
    law_particles: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f: TestFunction = py_to_json(function)?;
    let mu0 = measure(mu0)?;
    let g = grid(t_end, dt)?;
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let opts = ShiftOptions { n_paths, law_particles };
    let inner = model.inner.clone();
    let check = py.detach(|| shift_coupling_verify(inner.as_ref(), &f, &v, &mu0, p, &g, &noise, &opts)).map_err(to_py)?;
    json_to_py(py, &check)
}

/// Integration-by-parts check in direction `v`.
#[pyfunction]
#[pyo3(signature = (model, function, v, mu0, t_end, dt, seed, n_paths = 10_000, law_particles = 2000))]
#[allow(clippy::too_many_arguments)]
fn integration_by_parts<'py>(
    py: Python<'py>,
    model: &PyModel,
    function: &Bound<'py, PyAny>,
    v: Vec<f64>,
    mu0: Vec<Vec<f64>>,
    t_end: f64,
    dt: f64,
    seed: u64,
    n_paths: usize,
    law_particles: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f: TestFunction = py_to_json(function)?;
    let mu0 = measure(mu0)?;
    let g = grid(t_end, dt)?;
    let noise = NoiseSpec::new(seed, model.inner.dim());
    let opts = ShiftOptions { n_paths, law_particles };
    let inner = model.inner.clone();
    let check = py.detach(|| integration_by_parts_check(inner.as_ref(), &f, &v, &mu0, &g, &noise, &opts)).map_err(to_py)?;
    json_to_py(py, &check)
}

/// Run a JSON config file, as `ddsde run` does, and return the report.
#[pyfunction]
#[pyo3(signature = (path, threads = None, refine = false, output_dir = None))]
fn run_config<'py>(
    py: Python<'py>,
    path: PathBuf,
    threads: Option<usize>,
    refine: bool,
    output_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = RunOptions { threads, refine, output_dir };
    let report = py.detach(|| run(&path, &opts)).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pyfunction]
fn list_models() -> Vec<&'static str> {
    models::list_models().to_vec()
}

#[pyfunction]
fn describe<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &models::describe(name).map_err(to_py)?)
}

#[pyfunction]
fn phi(s: f64, t: f64, lambda: f64, kappa1: f64, kappa2: f64) -> PyResult<f64> {
    harnack::phi(s, t, lambda, kappa1, kappa2).map_err(to_py)
}

#[pyfunction]
fn contraction_exponent_cc(alpha: f64, beta: f64) -> f64 {
    models::contraction_exponent_cc(alpha, beta)
}

#[pyfunction]
#[pyo3(signature = (p, s, t, kappa1, kappa2, lambda, gamma, horizon, moment = 1.0))]
#[allow(clippy::too_many_arguments)]
fn power_harnack_constant(
    p: f64,
    s: f64,
    t: f64,
    kappa1: f64,
    kappa2: f64,
    lambda: f64,
    gamma: f64,
    horizon: f64,
    moment: f64,
) -> PyResult<f64> {
    let cfg = CouplingConfig { horizon, kappa1, kappa2, lambda, gamma_t: Some(gamma), weight_clip: None };
    harnack::power_harnack_constant(p, s, t, &cfg, moment).map_err(to_py)
}

/// Density bound `kind` in {"et1", "et2", "et3"} with constant `λ` and `‖∇b‖`.
#[pyfunction]
fn density_bound(kind: &str, p: f64, s: f64, t: f64, lambda: f64, grad_b: f64, d: usize) -> PyResult<f64> {
    let kind = match kind {
        "et1" => DensityBound::Et1,
        "et2" => DensityBound::Et2,
        "et3" => DensityBound::Et3,
        other => return Err(PyValueError::new_err(format!("unknown density bound `{other}`"))),
    };
    density_bound_rhs(kind, p, s, t, &|_| lambda, &|_| grad_b, d).map_err(to_py)
}

#[pymodule]
fn ddsde(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(picard, m)?)?;
    m.add_function(wrap_pyfunction!(contraction, m)?)?;
    m.add_function(wrap_pyfunction!(log_harnack, m)?)?;
    m.add_function(wrap_pyfunction!(shift_harnack, m)?)?;
    m.add_function(wrap_pyfunction!(integration_by_parts, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(list_models, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_exponent_cc, m)?)?;
    m.add_function(wrap_pyfunction!(power_harnack_constant, m)?)?;
    m.add_function(wrap_pyfunction!(density_bound, m)?)?;
    Ok(())
}
