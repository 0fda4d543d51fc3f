//! Python bindings: the `macroipm` extension module.

use ::macroipm::config::RunConfig;
use ::macroipm::fv::{self, mixing_zone_width, FvConfig};
use ::macroipm::initial_data::{s0_samples, AnalyticGraph};
use ::macroipm::jko::{self, JkoConfig, JkoStepReport, Theta1D};
use ::macroipm::kernel::{eval_green, eval_kernel};
use ::macroipm::levelset::{solve_eta, ConvergenceReport, SolverConfig};
use ::macroipm::reconstruction::{Grid, Reconstructor};
use ::macroipm::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyFileNotFoundError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let message = e.to_string();
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Invalid(_) | Error::CflTooLarge(_) | Error::MassMismatch(..) => {
            PyValueError::new_err(message)
        }
        Error::MissingArtifact(_) => PyFileNotFoundError::new_err(message),
        Error::Io(_) => PyOSError::new_err(message),
        _ => PyRuntimeError::new_err(message),
    }
}

/// Initial interface `x2 = gamma0(x1)`.
#[pyclass(name = "AnalyticGraph", module = "macroipm", skip_from_py_object)]
#[derive(Clone)]
struct PyAnalyticGraph {
    inner: AnalyticGraph,
}

#[pymethods]
impl PyAnalyticGraph {
    #[staticmethod]
    fn flat() -> Self {
        Self { inner: AnalyticGraph::flat() }
    }

    /// `amplitude * cos(wavenumber * x1)`.
    #[staticmethod]
    fn cosine(amplitude: f64, wavenumber: usize) -> Self {
        Self {
            inner: AnalyticGraph::cosine(amplitude, wavenumber),
        }
    }

    /// From `(re, im)` coefficients ordered `k = -N..=N`.
    #[staticmethod]
    fn from_coeffs(coeffs: Vec<(f64, f64)>) -> PyResult<Self> {
        let coeffs = coeffs.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        Ok(Self {
            inner: AnalyticGraph::from_coeffs(coeffs).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (x1, derivative = 0))]
    fn eval(&self, x1: f64, derivative: u32) -> f64 {
        self.inner.eval_real(x1, derivative)
    }

    #[getter]
    fn strip_radius(&self) -> f64 {
        self.inner.rho0
    }

    /// Normal velocity of the interface at `n` equispaced points.
    fn normal_velocity(&self, n: usize) -> Vec<f64> {
        s0_samples(&self.inner, n)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("AnalyticGraph(max_abs={:.6}, modes={})", self.inner.max_abs(), self.inner.spectrum().max_k())
    }
}

/// Converged level-set field with its reconstruction.
#[pyclass(name = "LevelSetSolution", module = "macroipm")]
struct PyLevelSetSolution {
    reconstructor: Reconstructor,
    report: ConvergenceReport,
}

#[pymethods]
impl PyLevelSetSolution {
    #[getter]
    fn iterations(&self) -> usize {
        self.report.iterations
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.report.residual
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.report.lambdas.clone()
    }

    fn density_at(&self, t: f64, x1: f64, x2: f64) -> PyResult<f64> {
        self.reconstructor.density_at(t, [x1, x2]).map_err(to_py)
    }

    fn velocity_at(&self, t: f64, x1: f64, x2: f64) -> PyResult<(f64, f64)> {
        let v = self.reconstructor.velocity_at(t, [x1, x2]).map_err(to_py)?;
        Ok((v[0], v[1]))
    }

    /// Density on a cell-centred `n1 x n2` grid over `[0, 2pi) x [-L, L]`,
    /// one list per `x2` row.
    fn density_field(&self, t: f64, n1: usize, n2: usize, half_height: f64) -> PyResult<Vec<Vec<f64>>> {
        let grid = Grid::cell_centred(n1, n2, half_height);
        let rho = self.reconstructor.density_field(t, &grid).map_err(to_py)?;
        Ok(rho.values.chunks(n1).map(<[f64]>::to_vec).collect())
    }

    /// Curves `x2 = gamma_t(x1, h)` for each level `h`.
    fn level_curves(&self, t: f64, levels: Vec<f64>, x1: Vec<f64>) -> Vec<Vec<f64>> {
        self.reconstructor.level_curves(t, &levels, &x1)
    }
}

#[pyfunction]
#[pyo3(signature = (gamma, alpha = 0.5, horizon = 0.05, modes = 16, quad_points = 32, n2 = 17, time_nodes = 10, reconstruction_quad = 32))]
#[allow(clippy::too_many_arguments)]
fn solve_levelset(
    py: Python<'_>,
    gamma: &PyAnalyticGraph,
    alpha: f64,
    horizon: f64,
    modes: usize,
    quad_points: usize,
    n2: usize,
    time_nodes: usize,
    reconstruction_quad: usize,
) -> PyResult<PyLevelSetSolution> {
    let config = SolverConfig {
        alpha,
        horizon,
        modes,
        quad_points,
        n2,
        time_nodes,
        ..SolverConfig::default()
    };
    let graph = gamma.inner.clone();
    let (ansatz, report) = py.detach(|| solve_eta(&graph, config)).map_err(to_py)?;
    Ok(PyLevelSetSolution {
        reconstructor: Reconstructor::new(ansatz, reconstruction_quad),
        report,
    })
}

/// Finite-volume run; densities come back as one `n2 x n1` list per time.
#[pyfunction]
#[pyo3(signature = (gamma, times, n1 = 128, n2 = 128, half_height = 4.0, cfl = 0.45, mu = 1.0))]
#[allow(clippy::too_many_arguments)]
fn fv_run<'py>(
    py: Python<'py>,
    gamma: &PyAnalyticGraph,
    times: Vec<f64>,
    n1: usize,
    n2: usize,
    half_height: f64,
    cfl: f64,
    mu: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = FvConfig {
        n1,
        n2,
        half_height,
        cfl,
        mu,
        ..FvConfig::default()
    };
    let graph = gamma.inner.clone();
    let run = py.detach(|| fv::run(&graph, &times, config)).map_err(to_py)?;
    let out = PyDict::new(py);
    let densities: Vec<Vec<Vec<f64>>> = run
        .densities
        .iter()
        .map(|d| d.values.chunks(n1).map(<[f64]>::to_vec).collect())
        .collect();
    let widths: Vec<f64> = run.densities.iter().map(mixing_zone_width).collect();
    out.set_item("times", times)?;
    out.set_item("densities", densities)?;
    out.set_item("mixing_zone_width", widths)?;
    out.set_item("steps", run.steps)?;
    out.set_item("max_mass_drift", run.max_mass_drift)?;
    out.set_item("max_entropy_production", run.max_entropy_production)?;
    Ok(out)
}

/// Saturation profile on a uniform grid over `[-half_width, half_width]`.
#[pyclass(name = "Theta1D", module = "macroipm", skip_from_py_object)]
#[derive(Clone)]
struct PyTheta1D {
    inner: Theta1D,
}

#[pymethods]
impl PyTheta1D {
    #[new]
    #[pyo3(signature = (values, half_width = jko::DEFAULT_HALF_WIDTH))]
    fn new(values: Vec<f64>, half_width: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Theta1D::new(values, half_width).map_err(to_py)?,
        })
    }

    /// `1` below zero, `0` above.
    #[staticmethod]
    #[pyo3(signature = (n, half_width = jko::DEFAULT_HALF_WIDTH))]
    fn step(n: usize, half_width: f64) -> Self {
        Self {
            inner: Theta1D::step(n, half_width),
        }
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn centres(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.y(i)).collect()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    /// L1 distance to the rarefaction profile at time `t`.
    fn burgers_gap(&self, t: f64) -> f64 {
        self.inner.l1_distance(|y| jko::burgers_exact(t, y))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn report_dict<'py>(py: Python<'py>, r: &JkoStepReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("h", r.h)?;
    d.set_item("objective", r.objective)?;
    d.set_item("initial_objective", r.initial_objective)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("euler_lagrange_residual", r.euler_lagrange_residual)?;
    d.set_item("monotone", r.monotone)?;
    Ok(d)
}

#[pyfunction]
fn w2_distance_1d(a: &PyTheta1D, b: &PyTheta1D) -> PyResult<f64> {
    jko::w2_distance_1d(&a.inner, &b.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (theta, h, max_iters = 10_000, stationarity = 1e-5))]
fn jko_step<'py>(
    py: Python<'py>,
    theta: &PyTheta1D,
    h: f64,
    max_iters: usize,
    stationarity: f64,
) -> PyResult<(PyTheta1D, Bound<'py, PyDict>)> {
    let config = JkoConfig {
        max_iters,
        stationarity,
        ..JkoConfig::default()
    };
    let (next, report) = jko::jko_step(&theta.inner, h, &config).map_err(to_py)?;
    Ok((PyTheta1D { inner: next }, report_dict(py, &report)?))
}

#[pyfunction]
fn run_jko(py: Python<'_>, theta0: &PyTheta1D, h: f64, steps: usize) -> PyResult<Vec<PyTheta1D>> {
    let start = theta0.inner.clone();
    let (states, _) = py
        .detach(|| jko::run_jko(&start, h, steps, &JkoConfig::default()))
        .map_err(to_py)?;
    Ok(states.into_iter().map(|inner| PyTheta1D { inner }).collect())
}

#[pyfunction]
fn burgers_exact(t: f64, y: f64) -> f64 {
    jko::burgers_exact(t, y)
}

/// Periodic Biot-Savart kernel `K(z)`.
#[pyfunction]
fn kernel(z1: f64, z2: f64) -> PyResult<(f64, f64)> {
    let k = eval_kernel(z1, z2).map_err(to_py)?;
    Ok((k[0], k[1]))
}

/// Periodic Green's function `G(z)`.
#[pyfunction]
fn green(z1: f64, z2: f64) -> PyResult<f64> {
    eval_green(z1, z2).map_err(to_py)
}

/// Validate a TOML run configuration; returns `(canonical_toml, hash)`.
#[pyfunction]
#[pyo3(signature = (text, overrides = Vec::new()))]
fn load_config(text: &str, overrides: Vec<String>) -> PyResult<(String, String)> {
    let config = RunConfig::from_toml(text, &overrides).map_err(to_py)?;
    Ok((config.to_toml(), config.hash()))
}

#[pymodule]
#[pyo3(name = "macroipm")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAnalyticGraph>()?;
    m.add_class::<PyLevelSetSolution>()?;
    m.add_class::<PyTheta1D>()?;
    m.add_function(wrap_pyfunction!(solve_levelset, m)?)?;
    m.add_function(wrap_pyfunction!(fv_run, m)?)?;
    m.add_function(wrap_pyfunction!(w2_distance_1d, m)?)?;
    m.add_function(wrap_pyfunction!(jko_step, m)?)?;
    m.add_function(wrap_pyfunction!(run_jko, m)?)?;
    m.add_function(wrap_pyfunction!(burgers_exact, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    Ok(())
}
