//! Python bindings for the simulation and estimation toolkit.
//!
//! The module mirrors the library's spine: model constants and kernel
//! evaluation on a `Model` class, exact linear sampling, the spectral
//! solver, weighted variation statistics and the two estimators as free
//! functions. Configuration errors surface as `ValueError`, runtime
//! failures (divergence, factorization loss) as `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fsheat::covariance;
use fsheat::estimation;
use fsheat::gaussian::LinearSampler;
use fsheat::grid::TimeGrid;
use fsheat::kernel::KernelEvaluator;
use fsheat::model::AlphaModel;
use fsheat::solver::{self, Sigma, SolverConfig};
use fsheat::variation;
use fsheat::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Stability index with its derived constants and kernel evaluator.
#[pyclass(frozen)]
struct Model {
    inner: AlphaModel,
    kernel: KernelEvaluator,
}

#[pymethods]
impl Model {
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        let inner = AlphaModel::new(alpha).map_err(err)?;
        Ok(Model { inner, kernel: KernelEvaluator::new(inner) })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn c_var(&self) -> f64 {
        self.inner.c_var
    }

    #[getter]
    fn c_qv(&self) -> f64 {
        self.inner.c_qv
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    /// Green function G(t, x) of the fractional heat operator.
    fn green_function(&self, t: f64, x: f64) -> PyResult<f64> {
        self.kernel.green_function(t, x).map_err(err)
    }

    /// Covariance E[u0(t, x) u0(s, x)] of the linear solution at mu = 1.
    fn cov_linear(&self, t: f64, s: f64) -> PyResult<f64> {
        covariance::cov_linear(&self.inner, t, s).map_err(err)
    }

    /// E[(u0(t + delta, x) - u0(t, x))^2] for the linear solution.
    fn increment_variance(&self, t: f64, delta: f64) -> PyResult<f64> {
        covariance::increment_variance_exact(&self.inner, t, delta).map_err(err)
    }

    /// Limit of the normalized quadratic variation over [t1, t2] with n steps.
    fn qv_limit(&self, t1: f64, t2: f64, n: usize) -> PyResult<f64> {
        let grid = TimeGrid::new(t1, t2, n).map_err(err)?;
        Ok(covariance::qv_limit_linear(&self.inner, &grid))
    }

    fn __repr__(&self) -> String {
        format!("Model(alpha={})", self.inner.alpha)
    }
}

/// Exact Gaussian sample paths of the linear solution at a fixed point,
/// observed on the uniform grid over [t1, t2] with n steps. Returns one list
/// of n + 1 values per replication; reruns with the same seed reproduce them.
#[pyfunction]
fn sample_linear(
    alpha: f64,
    t1: f64,
    t2: f64,
    n: usize,
    replications: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let model = AlphaModel::new(alpha).map_err(err)?;
    let grid = TimeGrid::new(t1, t2, n).map_err(err)?;
    let sampler = LinearSampler::new(model, &grid).map_err(err)?;
    Ok(sampler
        .replications(seed, replications)
        .into_iter()
        .map(|p| p.values)
        .collect())
}

/// Normalized weighted quadratic variation n^{-1/alpha} sum of squared
/// increments of one trajectory on the grid over [t1, t2].
#[pyfunction]
fn weighted_qv(alpha: f64, t1: f64, t2: f64, values: Vec<f64>) -> PyResult<f64> {
    let (model, grid) = model_and_grid(alpha, t1, t2, values.len())?;
    variation::weighted_qv(&model, &grid, &values).map_err(err)
}

/// Riemann-sum limit of the weighted variation for a sigma^2 record with
/// one value per step of the grid over [t1, t2].
#[pyfunction]
fn qv_target(alpha: f64, t1: f64, t2: f64, sigma_sq: Vec<f64>) -> PyResult<f64> {
    let model = AlphaModel::new(alpha).map_err(err)?;
    let grid = TimeGrid::new(t1, t2, sigma_sq.len()).map_err(err)?;
    variation::qv_target_nonlinear(&model, &grid, &sigma_sq).map_err(err)
}

/// Noise-level estimator from one constant-coefficient trajectory.
#[pyfunction]
fn estimate_sigma2(alpha: f64, t1: f64, t2: f64, values: Vec<f64>) -> PyResult<f64> {
    let (model, grid) = model_and_grid(alpha, t1, t2, values.len())?;
    estimation::estimate_sigma2(&model, &grid, &values).map_err(err)
}

/// Drift estimator from one trajectory and its sigma^2 record, one value
/// per step (left endpoints, as `solve_path` returns minus the last entry).
#[pyfunction]
fn estimate_mu(
    alpha: f64,
    t1: f64,
    t2: f64,
    values: Vec<f64>,
    sigma_sq: Vec<f64>,
) -> PyResult<f64> {
    let (model, grid) = model_and_grid(alpha, t1, t2, values.len())?;
    estimation::estimate_mu(&model, &grid, &values, &sigma_sq).map_err(err)
}

fn model_and_grid(alpha: f64, t1: f64, t2: f64, len: usize) -> PyResult<(AlphaModel, TimeGrid)> {
    if len < 2 {
        return Err(PyValueError::new_err("values: need at least two observations"));
    }
    let model = AlphaModel::new(alpha).map_err(err)?;
    let grid = TimeGrid::new(t1, t2, len - 1).map_err(err)?;
    Ok((model, grid))
}

fn build_config(
    alpha: f64,
    mu: f64,
    sigma: &str,
    domain_half_length: f64,
    modes: usize,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> PyResult<SolverConfig> {
    Ok(SolverConfig {
        model: AlphaModel::new(alpha).map_err(err)?,
        mu,
        domain_half_length,
        modes,
        dt,
        t_end,
        sigma: sigma.parse::<Sigma>().map_err(err)?,
        seed,
    })
}

/// Runs the spectral solver once and samples the field at the given spatial
/// points on the observation grid over [t1, t2] with n steps. Returns
/// (values, sigma_sq), one list per point. `sigma` uses the preset syntax
/// `constant:LEVEL`, `affine:BASE:SLOPE` or `bounded-smooth:FLOOR:SCALE`.
#[pyfunction]
#[pyo3(signature = (
    alpha, t1, t2, n, points, *,
    mu = 1.0, sigma = "constant:1", domain_half_length = 10.0,
    modes = 1024, dt = 1.0 / 8192.0, t_end = None, seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn solve_path(
    alpha: f64,
    t1: f64,
    t2: f64,
    n: usize,
    points: Vec<f64>,
    mu: f64,
    sigma: &str,
    domain_half_length: f64,
    modes: usize,
    dt: f64,
    t_end: Option<f64>,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let t_end = t_end.unwrap_or(t2);
    let config = build_config(alpha, mu, sigma, domain_half_length, modes, dt, t_end, seed)?;
    let obs = TimeGrid::new(t1, t2, n).map_err(err)?;
    let bundle = solver::solve_path(&config, &obs, &points).map_err(err)?;
    let values = bundle.paths.into_iter().map(|p| p.values).collect();
    Ok((values, bundle.sigma_sq))
}

/// Runs the spectral solver once and snapshots the whole field at each time.
/// Returns (x_grid, fields), one list of values per requested time. The same
/// seed reproduces the realization seen by `solve_path`.
#[pyfunction]
#[pyo3(signature = (
    alpha, times, *,
    mu = 1.0, sigma = "constant:1", domain_half_length = 10.0,
    modes = 1024, dt = 1.0 / 8192.0, t_end = None, seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn solve_field(
    alpha: f64,
    times: Vec<f64>,
    mu: f64,
    sigma: &str,
    domain_half_length: f64,
    modes: usize,
    dt: f64,
    t_end: Option<f64>,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let t_end = t_end.unwrap_or(times.last().copied().unwrap_or(0.0));
    let config = build_config(alpha, mu, sigma, domain_half_length, modes, dt, t_end, seed)?;
    let states = solver::solve_field(&config, &times).map_err(err)?;
    let x_grid = states.first().map(|s| s.x_grid.clone()).unwrap_or_default();
    Ok((x_grid, states.into_iter().map(|s| s.values).collect()))
}

/// Per-replication seed used by every ensemble in the toolkit.
#[pyfunction]
fn derive_seed(base: u64, index: u64) -> u64 {
    fsheat::rng::derive_seed(base, index)
}

#[pymodule]
fn fsheat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(sample_linear, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_qv, m)?)?;
    m.add_function(wrap_pyfunction!(qv_target, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma2, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mu, m)?)?;
    m.add_function(wrap_pyfunction!(solve_path, m)?)?;
    m.add_function(wrap_pyfunction!(solve_field, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
