//! Python bindings. Reports and solutions cross the boundary as JSON text.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gridstl::cases;
use gridstl::controller::{self, Fidelity, Schedule};
use gridstl::lti::{discretize_zoh, LtiSystem, TimeDomain};
use gridstl::milp::from_lp_str;
use gridstl::scenario::{self, ScenarioConfig, TriggerConfig};
use gridstl::solver::{solve_milp, Limits};
use gridstl::stl::{self, StlFormula};
use gridstl::trace::Trace;
use gridstl::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Scenario { .. } | Error::Parse { .. } | Error::Domain(_) | Error::Dimension(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fidelity(name: &str) -> PyResult<Fidelity> {
    match name {
        "linear" => Ok(Fidelity::Linear),
        "nonlinear" => Ok(Fidelity::Nonlinear),
        _ => Err(PyValueError::new_err(format!("fidelity must be `linear` or `nonlinear`, got `{name}`"))),
    }
}

fn trace_from(channels: BTreeMap<String, Vec<f64>>, t_s: f64) -> PyResult<Trace> {
    let mut tr = Trace::new(t_s).map_err(py_err)?;
    for (name, values) in channels {
        tr.push_channel(name, values).map_err(py_err)?;
    }
    Ok(tr)
}

fn trace_to(tr: &Trace) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = tr.channels().map(|(n, v)| (n.to_string(), v.to_vec())).collect();
    out.insert("time".into(), (0..tr.len()).map(|k| tr.time(k)).collect());
    out
}

#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        scenario::parse_scenario(text).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        scenario::load_scenario(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    /// One of the shipped cases: `case1`, `case2`, `case3`.
    #[staticmethod]
    fn builtin(case: &str) -> PyResult<Self> {
        scenario::builtin(case).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Copy with the overrides of `case1`, `case2`, `case3` or `custom`.
    fn with_case(&self, case: &str) -> PyResult<Self> {
        cases::apply_case(&self.inner, case).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Copy with a robust factor (Hz).
    fn with_eps(&self, eps: f64) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.milp.eps = eps;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Copy with a frequency measurement bias (Hz).
    fn with_bias(&self, bias: f64) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.plant.bias = bias;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn t_s(&self) -> f64 {
        self.inner.milp.t_s
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.milp.horizon
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.milp.eps
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, t_s={}, horizon={})", self.inner.name, self.inner.milp.t_s, self.inner.milp.horizon)
    }
}

#[pyclass(name = "Schedule", from_py_object)]
#[derive(Clone)]
struct PySchedule {
    inner: Schedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| Self { inner }).map_err(json_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    /// Block switches of both turbines.
    #[getter]
    fn b(&self) -> Vec<Vec<u8>> {
        self.inner.b.to_vec()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn on_time(&self) -> usize {
        self.inner.on_time
    }

    #[getter]
    fn startups(&self) -> usize {
        self.inner.startups
    }

    #[getter]
    fn status(&self) -> String {
        serde_json::to_value(self.inner.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    #[getter]
    fn offset_steps(&self) -> usize {
        self.inner.offset_steps
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(objective={}, on_time={}, status={})",
            self.inner.objective,
            self.inner.on_time,
            self.status()
        )
    }
}

#[pyclass(name = "Formula", from_py_object)]
#[derive(Clone)]
struct PyFormula {
    inner: StlFormula,
}

#[pymethods]
impl PyFormula {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        stl::parse(text).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Whenever `|var|` reaches `f_c`, it returns below `f_c` within `t_a`
    /// seconds and stays there.
    #[staticmethod]
    fn recovery(var: &str, f_c: f64, t_a: f64) -> PyResult<Self> {
        StlFormula::recovery(var, f_c, t_a).map(|inner| Self { inner }).map_err(py_err)
    }

    fn tighten(&self, eps: f64) -> Self {
        Self {
            inner: self.inner.tighten(eps),
        }
    }

    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    /// Robustness at sample `k` of a trace given as channel lists.
    #[pyo3(signature = (channels, t_s, k = 0))]
    fn robustness(&self, channels: BTreeMap<String, Vec<f64>>, t_s: f64, k: usize) -> PyResult<f64> {
        let tr = trace_from(channels, t_s)?;
        self.inner.robustness(&tr, k).map_err(py_err)
    }

    #[pyo3(signature = (channels, t_s, k = 0))]
    fn holds(&self, channels: BTreeMap<String, Vec<f64>>, t_s: f64, k: usize) -> PyResult<bool> {
        let tr = trace_from(channels, t_s)?;
        self.inner.evaluate_bool(&tr, k).map_err(py_err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({})", self.inner)
    }
}

/// Solves the scheduling problem of a scenario.
#[pyfunction]
fn schedule(py: Python<'_>, scenario: &PyScenario) -> PyResult<PySchedule> {
    let cfg = scenario.inner.clone();
    py.detach(|| controller::schedule(&cfg))
        .map(|inner| PySchedule { inner })
        .map_err(py_err)
}

/// Replays a schedule; returns the trace channels and the report as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, schedule, fidelity = "linear"))]
fn closed_loop(
    py: Python<'_>,
    scenario: &PyScenario,
    schedule: &PySchedule,
    fidelity: &str,
) -> PyResult<(BTreeMap<String, Vec<f64>>, String)> {
    let f = self::fidelity(fidelity)?;
    let (cfg, sched) = (scenario.inner.clone(), schedule.inner.clone());
    let (tr, rep) = py.detach(|| controller::closed_loop(&cfg, &sched, f)).map_err(py_err)?;
    Ok((trace_to(&tr), serde_json::to_string(&rep).map_err(json_err)?))
}

/// Runs a case end to end, writes the artifacts and returns the report JSON.
#[pyfunction]
fn run_case(py: Python<'_>, case: &str, scenario: &PyScenario, out_dir: PathBuf) -> PyResult<String> {
    let cfg = scenario.inner.clone();
    let case = case.to_string();
    let run = py.detach(|| cases::run_case(&case, &cfg, &out_dir)).map_err(py_err)?;
    serde_json::to_string(&run.report).map_err(json_err)
}

/// Robust-factor search; returns the calibration JSON.
#[pyfunction]
#[pyo3(signature = (scenario, fidelity = "nonlinear", eps_min = -0.06, max_iter = 4))]
fn calibrate_epsilon(py: Python<'_>, scenario: &PyScenario, fidelity: &str, eps_min: f64, max_iter: usize) -> PyResult<String> {
    let f = self::fidelity(fidelity)?;
    let cfg = scenario.inner.clone();
    let cal = py
        .detach(|| controller::calibrate_epsilon(&cfg, f, eps_min, max_iter))
        .map_err(py_err)?;
    serde_json::to_string(&cal).map_err(json_err)
}

/// First sample where `|v| >= threshold` has held for `consecutive` samples.
#[pyfunction]
#[pyo3(signature = (samples, threshold, consecutive = 2))]
fn detect_trigger(samples: Vec<f64>, threshold: f64, consecutive: usize) -> PyResult<Option<usize>> {
    let cfg = TriggerConfig {
        threshold,
        consecutive,
        channel: "x1".into(),
    };
    cfg.validate().map_err(py_err)?;
    Ok(controller::detect_trigger(&samples, &cfg))
}

/// Zero-order-hold discretization of `(A, B)` given as row lists.
#[pyfunction]
fn discretize(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, t_s: f64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    if a.iter().any(|r| r.len() != n) || b.len() != n || b.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("A must be n×n and B n×m"));
    }
    let am = nalgebra::DMatrix::from_row_iterator(n, n, a.into_iter().flatten());
    let bm = nalgebra::DMatrix::from_row_iterator(n, m, b.into_iter().flatten());
    let sys = LtiSystem::from_matrices(
        am,
        bm,
        nalgebra::DMatrix::zeros(0, n),
        nalgebra::DMatrix::zeros(0, m),
        TimeDomain::Continuous,
    )
    .map_err(py_err)?;
    let d = discretize_zoh(&sys, t_s).map_err(py_err)?;
    let rows = |x: &nalgebra::DMatrix<f64>| (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    Ok((rows(&d.a), rows(&d.b)))
}

/// Solves a CPLEX-LP model; returns the solution JSON.
#[pyfunction]
#[pyo3(signature = (text, time_limit = None))]
fn solve_lp_text(py: Python<'_>, text: &str, time_limit: Option<f64>) -> PyResult<String> {
    let model = from_lp_str(text).map_err(py_err)?;
    let limits = Limits {
        time: time_limit,
        ..Limits::default()
    };
    let sol = py.detach(|| solve_milp(&model, &limits));
    serde_json::to_string(&sol.to_json(&model)).map_err(json_err)
}

#[pymodule]
fn gridstl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyFormula>()?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop, m)?)?;
    m.add_function(wrap_pyfunction!(run_case, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(detect_trigger, m)?)?;
    m.add_function(wrap_pyfunction!(discretize, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp_text, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
