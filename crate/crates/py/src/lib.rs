//! Python module `platform_qbd`: parameters, the analytic solver, the
//! simulator, the truncated oracle and the sojourn-time distribution.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use platform_qbd::sojourn::sojourn_cdf_grid;
use platform_qbd::solver::solve_stationary;
use platform_qbd::{self as core, QbdError};

fn to_py_err(e: QbdError) -> PyErr {
    match e {
        QbdError::InvalidParams(_) | QbdError::Undefined(_) | QbdError::Unstable { .. } | QbdError::Capacity { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_model(model: &str) -> PyResult<core::Model> {
    model.parse().map_err(to_py_err)
}

/// Arrival, service and matching rates, owner count, price and owner share.
#[pyclass(name = "ModelParams", module = "platform_qbd", get_all, from_py_object)]
#[derive(Clone)]
pub struct PyModelParams {
    pub lambda_: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_owners: usize,
    pub price: f64,
    pub share: f64,
}

impl PyModelParams {
    fn inner(&self) -> core::ModelParams {
        core::ModelParams {
            lambda: self.lambda_,
            mu: self.mu,
            gamma: self.gamma,
            n_owners: self.n_owners,
            price: self.price,
            share: self.share,
        }
    }
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (lambda_, mu, gamma, n_owners, price = 50.0, share = 0.8))]
    fn new(lambda_: f64, mu: f64, gamma: f64, n_owners: usize, price: f64, share: f64) -> PyResult<Self> {
        let p = core::ModelParams::new(lambda_, mu, gamma, n_owners, price, share).map_err(to_py_err)?;
        Ok(Self {
            lambda_: p.lambda,
            mu: p.mu,
            gamma: p.gamma,
            n_owners: p.n_owners,
            price: p.price,
            share: p.share,
        })
    }

    /// Traffic intensity; the instance is stable when it is below one.
    fn rho(&self) -> f64 {
        core::traffic_intensity(&self.inner())
    }

    fn is_stable(&self) -> bool {
        self.rho() < 1.0
    }

    /// `(exact, sufficient)` smallest stable owner counts.
    fn min_stable_owners(&self) -> (usize, usize) {
        let r = core::stability_report(&self.inner());
        (r.n_min_exact, r.n_min_corollary)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(lambda_={}, mu={}, gamma={}, n_owners={}, price={}, share={})",
            self.lambda_, self.mu, self.gamma, self.n_owners, self.price, self.share
        )
    }
}

/// Stopping tolerance and iteration cap of the rate-matrix iteration, and
/// the tail mass below which level sums are cut.
#[pyclass(name = "SolverOptions", module = "platform_qbd", get_all, from_py_object)]
#[derive(Clone)]
pub struct PySolverOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    pub truncation_tol: f64,
}

impl PySolverOptions {
    fn inner(&self) -> core::SolverOptions {
        core::SolverOptions {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            truncation_tol: self.truncation_tol,
        }
    }
}

#[pymethods]
impl PySolverOptions {
    #[new]
    #[pyo3(signature = (epsilon = 1e-12, max_iter = 100_000, truncation_tol = 1e-10))]
    fn new(epsilon: f64, max_iter: usize, truncation_tol: f64) -> Self {
        Self {
            epsilon,
            max_iter,
            truncation_tol,
        }
    }
}

fn options(opts: Option<PySolverOptions>) -> core::SolverOptions {
    opts.map(|o| o.inner()).unwrap_or_default()
}

/// Analytic measures of one stable instance.
#[pyclass(name = "Report", module = "platform_qbd", get_all)]
pub struct PyReport {
    pub model: String,
    pub eq1: f64,
    pub eq2: f64,
    pub ew_little: f64,
    pub ew_rg: Option<f64>,
    pub f1: f64,
    pub f2: f64,
    pub f1_throughput_based: f64,
    pub throughput: f64,
    pub rho: f64,
    pub residual_r: f64,
    pub iterations: usize,
    pub spectral_radius: f64,
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "Report(model='{}', eq1={}, eq2={}, ew_little={}, throughput={}, rho={})",
            self.model, self.eq1, self.eq2, self.ew_little, self.throughput, self.rho
        )
    }
}

/// Simulation mean with its 99% confidence half-width.
#[pyclass(name = "Estimate", module = "platform_qbd", get_all)]
pub struct PyEstimate {
    pub mean: f64,
    pub ci_halfwidth: Option<f64>,
    pub replications: usize,
}

#[pymethods]
impl PyEstimate {
    fn contains(&self, value: f64) -> bool {
        self.ci_halfwidth.is_some_and(|h| (value - self.mean).abs() <= h)
    }

    fn __repr__(&self) -> String {
        format!("Estimate(mean={}, ci_halfwidth={:?})", self.mean, self.ci_halfwidth)
    }
}

impl From<&core::SimEstimate> for PyEstimate {
    fn from(e: &core::SimEstimate) -> Self {
        Self {
            mean: e.mean,
            ci_halfwidth: e.ci_halfwidth,
            replications: e.replications,
        }
    }
}

#[pyclass(name = "SimulationResult", module = "platform_qbd", get_all)]
pub struct PySimulationResult {
    pub eq1: Py<PyEstimate>,
    pub eq2: Py<PyEstimate>,
    pub throughput: Py<PyEstimate>,
    pub sojourn_mean: Py<PyEstimate>,
}

#[pyfunction]
fn traffic_intensity(params: PyModelParams) -> f64 {
    params.rho()
}

/// Rate matrix, boundary solve and measures. Raises `ValueError` on
/// unstable instances.
#[pyfunction]
#[pyo3(signature = (model, params, options = None))]
fn analyze(py: Python<'_>, model: &str, params: PyModelParams, options: Option<PySolverOptions>) -> PyResult<PyReport> {
    let model = parse_model(model)?;
    let (p, opts) = (params.inner(), self::options(options));
    let a = py.detach(|| core::analyze(model, &p, &opts)).map_err(to_py_err)?;
    let r = &a.report;
    Ok(PyReport {
        model: model.as_str().into(),
        eq1: r.mean_idle_owners,
        eq2: r.mean_waiting_seekers,
        ew_little: r.sojourn_mean_little,
        ew_rg: r.sojourn_mean_rg,
        f1: r.platform_profit,
        f2: r.owner_profit,
        f1_throughput_based: r.platform_profit_throughput,
        throughput: r.throughput,
        rho: r.rho,
        residual_r: a.rate.residual,
        iterations: a.rate.iterations,
        spectral_radius: a.rate.spectral_radius,
    })
}

/// Independent replications of the event-driven simulator.
#[pyfunction]
#[pyo3(signature = (model, params, max_events = 500_000, replications = 20, base_seed = 20_240_601, warmup_fraction = 0.2))]
fn simulate(
    py: Python<'_>,
    model: &str,
    params: PyModelParams,
    max_events: u64,
    replications: usize,
    base_seed: u64,
    warmup_fraction: f64,
) -> PyResult<PySimulationResult> {
    let model = parse_model(model)?;
    let cfg = core::SimConfig {
        max_events,
        replications,
        base_seed,
        warmup_fraction,
        cdf_times: Vec::new(),
    };
    let p = params.inner();
    let sim = py.detach(|| core::simulate(model, &p, &cfg)).map_err(to_py_err)?;
    Ok(PySimulationResult {
        eq1: Py::new(py, PyEstimate::from(&sim.eq1))?,
        eq2: Py::new(py, PyEstimate::from(&sim.eq2))?,
        throughput: Py::new(py, PyEstimate::from(&sim.throughput))?,
        sojourn_mean: Py::new(py, PyEstimate::from(&sim.sojourn_mean))?,
    })
}

/// Brute-force solve of the generator cut at `levels` levels; returns
/// `(eq1, eq2, throughput, tail_mass)`.
#[pyfunction]
fn truncated_solve(
    py: Python<'_>,
    model: &str,
    params: PyModelParams,
    levels: usize,
) -> PyResult<(f64, f64, f64, f64)> {
    let model = parse_model(model)?;
    let p = params.inner();
    let t = py
        .detach(|| core::truncated_stationary(model, &p, levels))
        .map_err(to_py_err)?;
    Ok((t.eq1, t.eq2, t.throughput, t.tail_mass))
}

/// Sojourn-time distribution function of model one at each of `times`.
#[pyfunction]
#[pyo3(signature = (params, times, options = None))]
fn sojourn_cdf(
    py: Python<'_>,
    params: PyModelParams,
    times: Vec<f64>,
    options: Option<PySolverOptions>,
) -> PyResult<Vec<f64>> {
    let (p, opts) = (params.inner(), self::options(options));
    py.detach(|| {
        let qbd = core::build_qbd(core::Model::One, &p)?;
        let (_, sol) = solve_stationary(&qbd, core::Model::One, &opts)?;
        let chain = core::build_absorbing_chain(&p, &sol, &opts)?;
        sojourn_cdf_grid(&chain, &times, opts.truncation_tol)
    })
    .map_err(to_py_err)
}

#[pymodule]
#[pyo3(name = "platform_qbd")]
fn platform_qbd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySolverOptions>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PySimulationResult>()?;
    m.add_function(wrap_pyfunction!(traffic_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_solve, m)?)?;
    m.add_function(wrap_pyfunction!(sojourn_cdf, m)?)?;
    Ok(())
}
