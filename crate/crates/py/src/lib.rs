//! Python bindings: instances, ground truth, LP solves, single runs and the
//! estimator formulas. Structured results cross the boundary as small classes
//! with read-only attributes; full traces are available as JSON.

use bwk_core::algos::{self, AlgorithmKind, LpMode, RunConfig, RunTrace};
use bwk_core::bench::{generate_planted, verify_trace};
use bwk_core::estimators;
use bwk_core::lp::{default_scale, scale_for_approx, solve_approx, solve_exact, ApproxOptions, LpProblem, LpSolution};
use bwk_core::model::{self, BwkInstance, GroundTruth as CoreGroundTruth, InstanceSpec};
use bwk_core::BwkError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: BwkError) -> PyErr {
    match e {
        BwkError::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A BwK instance. Resource 0 is time; the user resources follow.
#[pyclass(module = "bwk_lab", frozen)]
struct Instance {
    inner: BwkInstance,
}

#[pymethods]
impl Instance {
    /// Two arms, one user resource, T = 100, B = 50.
    #[staticmethod]
    fn canonical() -> Self {
        Instance {
            inner: model::canonical_instance(),
        }
    }

    /// The canonical instance plus a dominated arm and a slack resource, with B = T/2.
    #[staticmethod]
    fn canonical_extended(horizon: u64) -> Self {
        Instance {
            inner: model::canonical_extended_instance(horizon),
        }
    }

    /// A random nondegenerate instance with optimality gap at least `margin`.
    #[staticmethod]
    #[pyo3(signature = (m=3, d_user=1, b=0.25, margin=0.05, horizon=4096, seed=0))]
    fn planted(m: usize, d_user: usize, b: f64, margin: f64, horizon: u64, seed: u64) -> PyResult<Self> {
        let inner = generate_planted(m, d_user, b, margin, horizon, seed).map_err(to_py)?;
        Ok(Instance { inner })
    }

    /// Parse the instance file format: `{"m", "d_user", "T", "B", "arms"}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: InstanceSpec = serde_json::from_str(text).map_err(json_err)?;
        let inner = model::augment_time_resource(&spec).map_err(to_py)?;
        Ok(Instance { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_spec()).map_err(json_err)
    }

    /// Same arms with a new horizon and total budget.
    fn with_horizon(&self, horizon: u64, budget: f64) -> PyResult<Self> {
        let inner = self.inner.with_horizon(horizon, budget).map_err(to_py)?;
        Ok(Instance { inner })
    }

    #[getter]
    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }

    #[getter]
    fn num_resources(&self) -> usize {
        self.inner.num_resources()
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon()
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget()
    }

    #[getter]
    fn reward_means(&self) -> Vec<f64> {
        self.inner.reward_means()
    }

    /// Mean consumption, one row per resource (time first), one column per arm.
    #[getter]
    fn cost_means(&self) -> Vec<Vec<f64>> {
        self.inner.cost_means()
    }

    fn ground_truth(&self) -> PyResult<GroundTruth> {
        let inner = model::compute_ground_truth(&self.inner).map_err(to_py)?;
        Ok(GroundTruth { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(m={}, d={}, T={}, B={})",
            self.inner.num_arms(),
            self.inner.num_resources(),
            self.inner.horizon(),
            self.inner.budget()
        )
    }
}

#[pyclass(module = "bwk_lab", frozen)]
struct GroundTruth {
    inner: CoreGroundTruth,
}

#[pymethods]
impl GroundTruth {
    #[getter]
    fn opt_lp(&self) -> f64 {
        self.inner.opt_lp
    }
    #[getter]
    fn xi_star(&self) -> Vec<f64> {
        self.inner.xi_star.clone()
    }
    #[getter]
    fn eta_star(&self) -> Vec<f64> {
        self.inner.eta_star.clone()
    }
    #[getter]
    fn i_star(&self) -> Vec<usize> {
        self.inner.i_star.clone()
    }
    #[getter]
    fn j_star(&self) -> Vec<usize> {
        self.inner.j_star.clone()
    }
    #[getter]
    fn j_prime(&self) -> Vec<usize> {
        self.inner.j_prime.clone()
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn nondegenerate(&self) -> bool {
        self.inner.nondegenerate
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

#[pyclass(module = "bwk_lab", frozen)]
struct LpResult {
    inner: LpSolution,
}

#[pymethods]
impl LpResult {
    /// "optimal", "infeasible", "unbounded" or "approx-failed".
    #[getter]
    fn status(&self) -> PyResult<String> {
        let v = serde_json::to_value(self.inner.status).map_err(json_err)?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }
    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }
    #[getter]
    fn dual(&self) -> Vec<f64> {
        self.inner.dual.clone()
    }
    #[getter]
    fn feas_violation(&self) -> f64 {
        self.inner.feasibility_violation
    }
}

/// Solve `max objective·x` s.t. `A x <= rhs`, `x >= 0`.
///
/// `mode="approx"` runs the game-based solver at accuracy `eps` on the LP with
/// right-hand sides divided by `scale` (default: a bound on `sum(x)`).
#[pyfunction]
#[pyo3(signature = (objective, a, rhs, mode="exact", eps=0.02, scale=None))]
fn solve_lp(
    objective: Vec<f64>,
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    mode: &str,
    eps: f64,
    scale: Option<f64>,
) -> PyResult<LpResult> {
    let lp = LpProblem {
        objective,
        a,
        rhs,
        ..Default::default()
    };
    let inner = match mode {
        "exact" => solve_exact(&lp).map_err(to_py)?,
        "approx" => {
            let s = scale.unwrap_or_else(|| default_scale(&lp));
            let scaled = scale_for_approx(&lp, s).map_err(to_py)?;
            solve_approx(&scaled, eps, ApproxOptions::default()).map_err(to_py)?
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be \"exact\" or \"approx\", got {other:?}"
            )))
        }
    };
    Ok(LpResult { inner })
}

#[pyclass(module = "bwk_lab", frozen)]
struct Trace {
    inner: RunTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    /// Rounds played before stopping.
    #[getter]
    fn tau(&self) -> u64 {
        self.inner.tau
    }
    #[getter]
    fn pulls(&self) -> Vec<u64> {
        self.inner.pulls.clone()
    }
    #[getter]
    fn expected_reward(&self) -> f64 {
        self.inner.expected_reward
    }
    #[getter]
    fn realized_reward(&self) -> f64 {
        self.inner.realized_reward
    }
    #[getter]
    fn remaining_budget(&self) -> Vec<f64> {
        self.inner.remaining_budget.clone()
    }
    #[getter]
    fn qmc_query_total(&self) -> u64 {
        self.inner.qmc_query_total
    }
    #[getter]
    fn lp_solve_count(&self) -> u64 {
        self.inner.lp_solve_count
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

/// Run one replication of `algorithm` (alg1-quantum, alg1-classical,
/// alg2-quantum or alg2-classical).
///
/// `run_config` is an optional JSON object with the same keys as an entry of
/// the CLI's "algorithms" list; its "algorithm" key may be omitted.
#[pyfunction]
#[pyo3(signature = (instance, algorithm, seed=0, lp_mode=None, run_config=None))]
fn simulate(
    instance: &Instance,
    algorithm: &str,
    seed: u64,
    lp_mode: Option<&str>,
    run_config: Option<&str>,
) -> PyResult<Trace> {
    let kind = AlgorithmKind::from_name(algorithm)
        .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm {algorithm:?}")))?;
    let mut cfg = match run_config {
        Some(text) => {
            let mut value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("algorithm".into(), kind.name().into());
            }
            serde_json::from_value::<RunConfig>(value).map_err(json_err)?
        }
        None => RunConfig::new(kind),
    };
    match lp_mode {
        None => {}
        Some("exact") => cfg.lp_mode = LpMode::Exact,
        Some("approx") => cfg.lp_mode = LpMode::Approx,
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "lp_mode must be \"exact\" or \"approx\", got {other:?}"
            )))
        }
    }
    let inner = algos::run(&instance.inner, &cfg, seed).map_err(to_py)?;
    verify_trace(&inner, &instance.inner).map_err(to_py)?;
    Ok(Trace { inner })
}

/// Classical confidence radius after `n` samples at horizon `horizon`.
#[pyfunction]
fn hoeffding_radius(n: u64, horizon: u64) -> f64 {
    estimators::hoeffding_radius(n, horizon)
}

/// Oracle queries for a univariate estimate with error `eps` and failure probability `delta`.
#[pyfunction]
#[pyo3(signature = (eps, delta, c1=1.0))]
fn qmc1_queries(eps: f64, delta: f64, c1: f64) -> PyResult<u64> {
    estimators::qmc1_queries(eps, delta, c1).map_err(to_py)
}

/// Oracle queries for a `d`-dimensional estimate with per-coordinate error `eps`.
#[pyfunction]
#[pyo3(signature = (d, eps, delta, c2=1.0))]
fn qmc2_queries(d: usize, eps: f64, delta: f64, c2: f64) -> PyResult<u64> {
    estimators::qmc2_queries(d, eps, delta, c2).map_err(to_py)
}

/// Outcome distribution of amplitude estimation on a grid of `grid` points.
#[pyfunction]
fn ae_outcome_law(a: f64, grid: u64) -> PyResult<Vec<f64>> {
    estimators::ae_outcome_law(a, grid).map_err(to_py)
}

#[pymodule]
fn bwk_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<GroundTruth>()?;
    m.add_class::<LpResult>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_radius, m)?)?;
    m.add_function(wrap_pyfunction!(qmc1_queries, m)?)?;
    m.add_function(wrap_pyfunction!(qmc2_queries, m)?)?;
    m.add_function(wrap_pyfunction!(ae_outcome_law, m)?)?;
    Ok(())
}
