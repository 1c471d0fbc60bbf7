//! Python bindings: network configurations, pilot designs, metrics and sweeps.

use anece::barrier::BarrierSettings;
use anece::experiment::{self, ExperimentSpec, Method, PilotFile};
use anece::metrics::{self, MetricSet};
use anece::model::{assemble_pilot, ConfigSpec, NetworkConfig, PilotFactor};
use anece::two_user;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

fn err(e: anece::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(m: &anece::linalg::CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: NetworkConfig,
}

#[pymethods]
impl PyConfig {
    /// Builds a configuration from its JSON description.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ConfigSpec::from_json(text).and_then(|s| s.build()).map_err(err)?;
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn symmetric(users: usize, antennas: usize, kp_db: f64, rho: f64) -> PyResult<Self> {
        Ok(PyConfig { inner: NetworkConfig::symmetric(users, antennas, kp_db, rho).map_err(err)? })
    }

    #[getter]
    fn users(&self) -> usize {
        self.inner.users()
    }

    #[getter]
    fn antennas(&self) -> Vec<usize> {
        self.inner.antenna_counts().to_vec()
    }

    #[getter]
    fn pilot_len(&self) -> usize {
        self.inner.pilot_len()
    }

    fn kp(&self, i: usize) -> PyResult<f64> {
        self.inner.check_user(i).map_err(err)?;
        Ok(self.inner.kp(i))
    }

    fn eigenvalues(&self, i: usize) -> PyResult<Vec<f64>> {
        self.inner.check_user(i).map_err(err)?;
        Ok(self.inner.eigenvalues(i).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Config(users={}, antennas={:?})", self.inner.users(), self.inner.antenna_counts())
    }
}

#[pyclass(name = "Pilot", frozen)]
struct PyPilot {
    factor: PilotFactor,
    #[pyo3(get)]
    method: Option<String>,
    #[pyo3(get)]
    eps: Option<f64>,
    #[pyo3(get)]
    iterations: Option<usize>,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl PyPilot {
    /// Design factor rows, as complex numbers.
    fn factor(&self) -> Vec<Vec<Complex64>> {
        rows(self.factor.f())
    }

    /// Stacked pilot rows for `config`.
    fn stacked(&self, config: &PyConfig) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(assemble_pilot(&config.inner, &self.factor).map_err(err)?.p()))
    }

    fn energy(&self, config: &PyConfig, i: usize) -> PyResult<f64> {
        config.inner.check_user(i).map_err(err)?;
        Ok(config.inner.pilot_energy(self.factor.f(), i))
    }

    fn to_json(&self, config: &PyConfig) -> PyResult<String> {
        let method = self.method.as_deref().map(str::parse::<Method>).transpose().map_err(err)?;
        let design = experiment::Design {
            factor: self.factor.clone(),
            eps: self.eps,
            iterations: self.iterations,
            converged: self.converged,
            rank_collapse: None,
        };
        let file = PilotFile::from_design(&config.inner, method, &design).map_err(err)?;
        serde_json::to_string(&file).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(config: &PyConfig, text: &str) -> PyResult<Self> {
        let file: PilotFile = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyPilot {
            factor: file.to_factor(&config.inner).map_err(err)?,
            method: file.method.map(|m| m.to_string()),
            eps: file.eps,
            iterations: None,
            converged: true,
        })
    }
}

/// Method names accepted by `design`.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    Method::ALL.iter().map(|m| m.as_str()).collect()
}

/// Designs a pilot. `barrier` is an optional JSON object of solver settings.
#[pyfunction]
#[pyo3(signature = (config, method, m=0, barrier=None))]
fn design(py: Python<'_>, config: &PyConfig, method: &str, m: usize, barrier: Option<&str>) -> PyResult<PyPilot> {
    let method: Method = method.parse().map_err(err)?;
    let settings: BarrierSettings = match barrier {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => BarrierSettings::default(),
    };
    settings.validate().map_err(err)?;
    let cfg = &config.inner;
    let d = py.detach(|| experiment::design(cfg, method, m, &settings)).map_err(err)?;
    Ok(PyPilot {
        factor: d.factor,
        method: Some(method.to_string()),
        eps: d.eps,
        iterations: d.iterations,
        converged: d.converged,
    })
}

/// Metric report as a dict; `metrics` is a list such as `"mse,mi,eve"`.
#[pyfunction]
#[pyo3(signature = (config, pilot, metrics="mse,mi,eve"))]
fn evaluate<'py>(py: Python<'py>, config: &PyConfig, pilot: &PyPilot, metrics: &str) -> PyResult<Bound<'py, PyAny>> {
    let set = MetricSet::parse(metrics).map_err(err)?;
    to_py(py, &metrics::evaluate(&config.inner, &pilot.factor, set).map_err(err)?)
}

#[pyfunction]
fn pairwise_mi(config: &PyConfig, pilot: &PyPilot, i: usize, j: usize) -> PyResult<f64> {
    metrics::pairwise_mi(&config.inner, pilot.factor.f(), i, j).map_err(err)
}

#[pyfunction]
fn fairness_ratio(values: Vec<f64>) -> Option<f64> {
    metrics::fairness_ratio(&values)
}

/// Two-user MSE-optimal allocation as `(c1, c2)`.
#[pyfunction]
fn two_user_mse(config: &PyConfig) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let a = two_user::mse_decoupled_allocation(&config.inner).map_err(err)?;
    Ok((a.c1, a.c2))
}

/// Two-user MI allocation as `(c1, c2, sum_mi)`.
#[pyfunction]
#[pyo3(signature = (config, tol=experiment::TWO_USER_TOL))]
fn two_user_mi(config: &PyConfig, tol: f64) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let out = two_user::mi_alternating_bisection(&config.inner, tol).map_err(err)?;
    Ok((out.allocation.c1, out.allocation.c2, out.i2))
}

/// `(sum MSE, sum MI)` of a two-user allocation.
#[pyfunction]
fn two_user_objective(config: &PyConfig, c1: Vec<f64>, c2: Vec<f64>) -> PyResult<(f64, f64)> {
    two_user::two_user_objective(&config.inner, &two_user::PowerAllocation { c1, c2 }).map_err(err)
}

/// Runs an experiment spec given as JSON and returns its rows as dicts.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = ExperimentSpec::from_json(spec).map_err(err)?;
    let rows = py.detach(|| experiment::run(&spec)).map_err(err)?;
    to_py(py, &rows)
}

/// Sum versus min-max fairness ratios for an experiment spec given as JSON.
#[pyfunction]
fn compare_fairness<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = ExperimentSpec::from_json(spec).map_err(err)?;
    let table = py.detach(|| experiment::compare_fairness(&spec)).map_err(err)?;
    to_py(py, &table)
}

#[pymodule]
fn pyanece(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPilot>()?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_mi, m)?)?;
    m.add_function(wrap_pyfunction!(fairness_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(two_user_mse, m)?)?;
    m.add_function(wrap_pyfunction!(two_user_mi, m)?)?;
    m.add_function(wrap_pyfunction!(two_user_objective, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare_fairness, m)?)?;
    Ok(())
}
