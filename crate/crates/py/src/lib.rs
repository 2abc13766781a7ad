//! Python bindings. Configs are passed as dicts and go through the same
//! serde types as the CLI, so defaults and validation match.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use kuramoto_cl::continuum::{self, SelfConsistencyProblem};
use kuramoto_cl::dynamics::{self, Record};
use kuramoto_cl::experiments::{
    self, BifurcateConfig, ConvergenceConfig, FamilySpec, InstabilityConfig, ModelConfig, PermutationConfig, Scenario,
    SelfConsistencyConfig, SimulateConfig, SolverConfig,
};
use kuramoto_cl::frequencies::FrequencyFunction;
use kuramoto_cl::metrics::{self, PhaseField};
use kuramoto_cl::{Error, PhaseState};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Permutation(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, obj: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let Some(obj) = obj else { return Ok(T::default()) };
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// `C(pK/a)` for the linear frequency function, or `None` below `2/π`.
#[pyfunction]
fn solve_c_linear(pk_over_a: f64) -> Option<f64> {
    continuum::solve_c_linear(pk_over_a)
}

/// Root of the self-consistency equation for `ω(x) = a(x − 1/2)`, with an
/// optional flip set. Returns the root report as a dict, or `None`.
#[pyfunction]
#[pyo3(signature = (a, p, k, minus=Vec::new(), plus=Vec::new()))]
fn solve_c_general<'py>(
    py: Python<'py>,
    a: f64,
    p: f64,
    k: f64,
    minus: Vec<(f64, f64)>,
    plus: Vec<(f64, f64)>,
) -> PyResult<Option<Bound<'py, PyAny>>> {
    let mut problem = SelfConsistencyProblem::new(FrequencyFunction::linear(a).map_err(err)?, p, k).map_err(err)?;
    if !(minus.is_empty() && plus.is_empty()) {
        problem = problem.with_flips(continuum::FlipSet::new(minus, plus).map_err(err)?);
    }
    match continuum::solve_c_general(&problem).map_err(err)? {
        None => Ok(None),
        Some(r) => {
            let d = PyDict::new(py);
            d.set_item("c", r.c)?;
            d.set_item("residual", r.residual)?;
            d.set_item("sign_changes", r.sign_changes)?;
            d.set_item("fixed_point", r.fixed_point)?;
            d.set_item("multiple_roots", r.multiple_roots)?;
            d.set_item("extrapolated", r.extrapolated)?;
            Ok(Some(d.into_any()))
        }
    }
}

/// Predicted gap `2 asin(a / (2KC))` between the extreme oscillators.
#[pyfunction]
#[pyo3(signature = (k, a=1.0, p=1.0))]
fn delta_u_prediction(k: f64, a: f64, p: f64) -> Option<f64> {
    continuum::delta_u_prediction(k, a, p)
}

/// `(r, ψ)` of a phase vector.
#[pyfunction]
fn order_parameter(u: Vec<f64>) -> (f64, f64) {
    metrics::order_parameter(&u)
}

/// Circle L² distance between the step embeddings of two phase vectors.
#[pyfunction]
fn circle_l2(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    let (f, g) = (metrics::embed(&u).map_err(err)?, metrics::embed(&v).map_err(err)?);
    Ok(metrics::circle_l2(&f, &g))
}

/// Best shift `θ` of `v` onto `u`; returns `(θ, distance)`.
#[pyfunction]
fn align_theta(u: Vec<f64>, v: Vec<f64>) -> PyResult<(f64, f64)> {
    let (f, g) = (metrics::embed(&u).map_err(err)?, metrics::embed(&v).map_err(err)?);
    let a = metrics::align_theta(&f, &g);
    Ok((a.theta_star, a.distance))
}

/// Stationary solution of the continuum limit for `ω(x) = a(x − 1/2)`.
#[pyclass(frozen)]
struct StationaryProfile(continuum::StationaryProfile);

#[pymethods]
impl StationaryProfile {
    /// `family` is `"stable"`, `"flipped"` or `"discontinuous"` (with
    /// `minus` / `plus` flip intervals).
    #[new]
    #[pyo3(signature = (a=1.0, p=1.0, k=1.0, family="stable", minus=Vec::new(), plus=Vec::new(), theta=0.0))]
    fn new(
        a: f64,
        p: f64,
        k: f64,
        family: &str,
        minus: Vec<(f64, f64)>,
        plus: Vec<(f64, f64)>,
        theta: f64,
    ) -> PyResult<Self> {
        let family = match family {
            "stable" => FamilySpec::Stable,
            "flipped" => FamilySpec::Flipped,
            "discontinuous" => FamilySpec::Discontinuous { minus, plus },
            other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
        };
        let cfg = InstabilityConfig {
            family,
            a,
            p,
            k,
            ..Default::default()
        };
        Ok(StationaryProfile(cfg.family_profile().map_err(err)?.with_theta(theta)))
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.name()
    }

    fn eval(&self, x: Vec<f64>) -> Vec<f64> {
        x.into_iter().map(|x| self.0.eval(x)).collect()
    }

    /// Midpoint values on `m` cells, e.g. as initial data for `m` oscillators.
    fn cells(&self, m: usize) -> Vec<f64> {
        (0..m).map(|i| self.0.value((i as f64 + 0.5) / m as f64)).collect()
    }

    /// `(∫cos U, ∫sin U)`.
    fn phasor_integrals(&self) -> (f64, f64) {
        let (s, c) = self.0.phasor_integrals();
        (c, s)
    }

    /// Sup over `mesh` points of the rotating-frame residual.
    #[pyo3(signature = (mesh=2000))]
    fn stationarity_residual(&self, mesh: usize) -> f64 {
        self.0.stationarity_residual(mesh)
    }

    /// Aligned distance from the embedding of `u` to this profile.
    fn distance(&self, u: Vec<f64>) -> PyResult<(f64, f64)> {
        let a = metrics::align_theta(&metrics::embed(&u).map_err(err)?, &self.0);
        Ok((a.theta_star, a.distance))
    }
}

/// A Kuramoto network built from a model dict (keys as in the CLI `model`
/// section: case, n, k, a, p, gamma, freq_mode, orientation, seed).
#[pyclass(frozen)]
struct KmSystem {
    inner: dynamics::KmSystem,
    xi: Vec<usize>,
}

#[pymethods]
impl KmSystem {
    #[new]
    #[pyo3(signature = (model=None))]
    fn new(py: Python<'_>, model: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let model: ModelConfig = from_py(py, model)?;
        model.validate().map_err(err)?;
        let (inner, xi) = model.system().map_err(err)?;
        Ok(KmSystem { inner, xi })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn omegas(&self) -> Vec<f64> {
        self.inner.omegas().to_vec()
    }

    /// Ascending-sort permutation of the frequencies.
    #[getter]
    fn xi(&self) -> Vec<usize> {
        self.xi.clone()
    }

    fn rhs(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.inner.rhs_fast(&u, &mut out).map_err(err)?;
        Ok(out)
    }

    /// Integrates from `u0`; `solver` keys as in the CLI `solver` section.
    /// Returns `(times, states)`.
    #[pyo3(signature = (u0, t_end, solver=None))]
    fn integrate(
        &self,
        py: Python<'_>,
        u0: Vec<f64>,
        t_end: f64,
        solver: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let cfg = from_py::<SolverConfig>(py, solver)?.integrator(Record::All);
        let state = PhaseState::new(0.0, u0).map_err(err)?;
        let traj = py
            .detach(|| dynamics::integrate(&self.inner, &state, t_end, &cfg))
            .map_err(err)?;
        Ok(traj.samples.into_iter().map(|s| (s.t, s.u)).unzip())
    }
}

/// One network run from random phases; returns the observables dict.
#[pyfunction]
#[pyo3(signature = (model=None, t_end=100.0, solver=None, lock_window=10.0, lock_tol=1e-3))]
fn simulate<'py>(
    py: Python<'py>,
    model: Option<&Bound<'py, PyDict>>,
    t_end: f64,
    solver: Option<&Bound<'py, PyDict>>,
    lock_window: f64,
    lock_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let model: ModelConfig = from_py(py, model)?;
    let solver: SolverConfig = from_py(py, solver)?;
    let sim = py
        .detach(|| experiments::simulate(&model, t_end, &solver, lock_window, lock_tol))
        .map_err(err)?;
    to_py(py, &sim.observables)
}

fn run_as<'py, S: Scenario + Send + Sync>(
    py: Python<'py>,
    config: Option<&Bound<'py, PyDict>>,
    out_dir: PathBuf,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: S = from_py(py, config)?;
    let report = py.detach(|| experiments::run(&cfg, &out_dir)).map_err(err)?;
    to_py(py, &report.summary)
}

/// Runs a CLI scenario by name and returns its summary dict.
#[pyfunction]
#[pyo3(signature = (name, config=None, out_dir="out".into()))]
fn run_scenario<'py>(
    py: Python<'py>,
    name: &str,
    config: Option<&Bound<'py, PyDict>>,
    out_dir: PathBuf,
) -> PyResult<Bound<'py, PyAny>> {
    match name {
        "selfconsistency" => run_as::<SelfConsistencyConfig>(py, config, out_dir),
        "simulate" => run_as::<SimulateConfig>(py, config, out_dir),
        "bifurcate" => run_as::<BifurcateConfig>(py, config, out_dir),
        "convergence" => run_as::<ConvergenceConfig>(py, config, out_dir),
        "permutation" => run_as::<PermutationConfig>(py, config, out_dir),
        "instability" => run_as::<InstabilityConfig>(py, config, out_dir),
        other => Err(PyValueError::new_err(format!("unknown scenario {other:?}"))),
    }
}

#[pymodule]
fn kuramoto_cl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LINEAR_THRESHOLD", continuum::LINEAR_THRESHOLD)?;
    m.add_function(wrap_pyfunction!(solve_c_linear, m)?)?;
    m.add_function(wrap_pyfunction!(solve_c_general, m)?)?;
    m.add_function(wrap_pyfunction!(delta_u_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(order_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(circle_l2, m)?)?;
    m.add_function(wrap_pyfunction!(align_theta, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_class::<StationaryProfile>()?;
    m.add_class::<KmSystem>()?;
    Ok(())
}
