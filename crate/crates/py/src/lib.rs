//! Python bindings for the lateral-movement analysis library.
//!
//! Exposes the validated network and policy types plus the main analysis
//! entry points. Structured results cross the boundary as plain Python
//! dicts/lists mirroring the JSON artifacts of the `latmove` CLI.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use latmove_core::heuristics;
use latmove_core::ltv;
use latmove_core::matrix::SquareMatrix;
use latmove_core::mc;
use latmove_core::metrics;
use latmove_core::net_model::{NetworkSpec, PolicyMatrix};
use latmove_core::policy_opt;

fn value_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .into_any()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {e}")))?;
    value_to_py(py, &v)
}

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn invalid<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Validated network description.
#[pyclass(frozen)]
struct Network {
    spec: NetworkSpec,
}

impl Network {
    fn node(&self, id: &str) -> PyResult<usize> {
        self.spec
            .index_of(id)
            .ok_or_else(|| invalid(format!("unknown node id `{id}`")))
    }
}

#[pymethods]
impl Network {
    /// Parses and validates a network description from its JSON text.
    /// Raises ValueError listing every violation.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (spec, _warnings) = NetworkSpec::from_json_str(text).map_err(invalid)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(invalid)?;
        Self::from_json(&text)
    }

    fn n(&self) -> usize {
        self.spec.n()
    }

    fn node_ids(&self) -> Vec<String> {
        self.spec.nodes().iter().map(|n| n.id.clone()).collect()
    }

    fn dmz(&self) -> Vec<String> {
        self.spec
            .dmz()
            .iter()
            .map(|&i| self.spec.node_id(i).to_string())
            .collect()
    }

    fn target(&self) -> String {
        self.spec.node_id(self.spec.target()).to_string()
    }

    fn beta(&self, source: &str, sink: &str) -> PyResult<f64> {
        Ok(self.spec.beta(self.node(source)?, self.node(sink)?))
    }

    /// Probability that a node sees no service link at a stage.
    fn idle_prob(&self, node: &str) -> PyResult<f64> {
        Ok(self.spec.idle_prob(self.node(node)?))
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec.to_raw()).expect("serializable")
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, dmz={:?}, target={})",
            self.spec.n(),
            self.dmz(),
            self.target()
        )
    }
}

/// Stationary honeypot policy over honey links.
#[pyclass(frozen)]
struct Policy {
    inner: PolicyMatrix,
}

#[pymethods]
impl Policy {
    /// Uniform over every feasible honey link.
    #[staticmethod]
    fn uniform(network: &Network) -> PyResult<Self> {
        Ok(Self {
            inner: PolicyMatrix::uniform(&network.spec).map_err(invalid)?,
        })
    }

    /// No honeypot at all.
    #[staticmethod]
    fn zero(network: &Network) -> Self {
        Self {
            inner: PolicyMatrix::zero(&network.spec),
        }
    }

    /// Deterministic honey link `source -> honeypot`.
    #[staticmethod]
    fn direct(network: &Network, source: &str, honeypot: &str) -> PyResult<Self> {
        let l = network.node(source)?;
        let w = network.node(honeypot)?;
        Ok(Self {
            inner: PolicyMatrix::direct(&network.spec, l, w).map_err(invalid)?,
        })
    }

    /// Validates an explicit probability matrix against the network.
    #[staticmethod]
    fn from_matrix(network: &Network, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let gamma = SquareMatrix::from_rows(rows).map_err(invalid)?;
        Ok(Self {
            inner: PolicyMatrix::new(&network.spec, gamma).map_err(invalid)?,
        })
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        self.inner.matrix().to_rows()
    }

    fn get(&self, network: &Network, source: &str, honeypot: &str) -> PyResult<f64> {
        Ok(self.inner.get(network.node(source)?, network.node(honeypot)?))
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn __repr__(&self) -> String {
        format!("Policy(total_mass={})", self.inner.total_mass())
    }
}

/// Probability that an intrusion at `initial` captures the target within
/// the intrusion stage itself.
#[pyfunction]
fn imminent_vulnerability(network: &Network, policy: &Policy, initial: &str) -> PyResult<f64> {
    ltv::imminent_vulnerability(&network.spec, &policy.inner, network.node(initial)?)
        .map_err(runtime)
}

/// Full vulnerability report (exact when feasible, bounds always) as a
/// dict mirroring the CLI JSON artifact.
#[pyfunction]
#[pyo3(signature = (network, policy, delta_k, exact_cap=12, bounds_only=false))]
fn vulnerability_report<'py>(
    py: Python<'py>,
    network: &Network,
    policy: &Policy,
    delta_k: usize,
    exact_cap: usize,
    bounds_only: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let report = ltv::vulnerability_report(
        &network.spec,
        &policy.inner,
        delta_k,
        exact_cap,
        bounds_only,
    )
    .map_err(runtime)?;
    to_py(py, &report)
}

/// Exact per-horizon trajectory from one initial node.
#[pyfunction]
#[pyo3(signature = (network, policy, delta_k, initial, exact_cap=12))]
fn ltv_exact(
    network: &Network,
    policy: &Policy,
    delta_k: usize,
    initial: &str,
    exact_cap: usize,
) -> PyResult<Vec<f64>> {
    Ok(ltv::ltv_exact_single(
        &network.spec,
        &policy.inner,
        delta_k,
        network.node(initial)?,
        exact_cap,
    )
    .map_err(runtime)?
    .values)
}

/// Lower and upper recursion values per DMZ node at the final horizon.
#[pyfunction]
fn ltv_bounds<'py>(
    py: Python<'py>,
    network: &Network,
    policy: &Policy,
    delta_k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let tables = ltv::bound_tables(&network.spec, &policy.inner, delta_k).map_err(runtime)?;
    let dict = PyDict::new(py);
    for &i in network.spec.dmz() {
        let entry = PyDict::new(py);
        entry.set_item("lower", tables.lower_at(i, delta_k))?;
        entry.set_item("upper", tables.upper_at(i, delta_k))?;
        dict.set_item(network.spec.node_id(i), entry)?;
    }
    Ok(dict)
}

#[pyfunction]
fn probability_of_interference(network: &Network, policy: &Policy) -> f64 {
    metrics::probability_of_interference(&network.spec, &policy.inner)
}

/// Policy entropy in nats (higher is stealthier).
#[pyfunction]
fn stealthiness(policy: &Policy) -> f64 {
    metrics::stealthiness(&policy.inner)
}

/// Expected roaming cost under a location cost matrix `d` (zero when
/// omitted); `weighting` is "paper" or "plain".
#[pyfunction]
#[pyo3(signature = (network, policy, d=None, weighting="paper"))]
fn cost_of_roaming(
    network: &Network,
    policy: &Policy,
    d: Option<Vec<Vec<f64>>>,
    weighting: &str,
) -> PyResult<f64> {
    let costs = match d {
        None => metrics::CostTable::Zero,
        Some(rows) => metrics::CostTable::Location(SquareMatrix::from_rows(rows).map_err(invalid)?),
    };
    let weighting = match weighting {
        "paper" => metrics::CorWeighting::Paper,
        "plain" => metrics::CorWeighting::Plain,
        other => return Err(invalid(format!("unknown weighting `{other}`"))),
    };
    Ok(metrics::cost_of_roaming(
        &network.spec,
        &policy.inner,
        &costs,
        weighting,
    ))
}

/// Iterative policy synthesis. Returns `(policy, trace_dict)`; a
/// non-converged run still returns its final iterate with
/// `trace["converged"] == False`.
#[pyfunction]
#[pyo3(signature = (network, delta_k, variant="risky", alpha_poi=0.0, alpha_sl=0.0,
                    alpha_cor=0.0, epsilon=1e-6, max_iter=200))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    network: &Network,
    delta_k: usize,
    variant: &str,
    alpha_poi: f64,
    alpha_sl: f64,
    alpha_cor: f64,
    epsilon: f64,
    max_iter: usize,
) -> PyResult<(Policy, Bound<'py, PyDict>)> {
    let variant = match variant {
        "risky" => policy_opt::OptimizeVariant::Risky,
        "conservative" => policy_opt::OptimizeVariant::Conservative,
        other => return Err(invalid(format!("unknown variant `{other}`"))),
    };
    let weights = policy_opt::ObjectiveWeights::new(alpha_poi, alpha_sl, alpha_cor);
    let outcome = policy_opt::optimize(
        &network.spec,
        &weights,
        &metrics::CostTable::Zero,
        metrics::CorWeighting::Paper,
        delta_k,
        variant,
        epsilon,
        max_iter,
        None,
    );
    let (policy, trace) = match outcome {
        Ok(pair) => pair,
        Err(policy_opt::PolicyOptError::DidNotConverge { policy, trace, .. }) => (policy, *trace),
        Err(e) => return Err(runtime(e)),
    };
    let dict = PyDict::new(py);
    dict.set_item("converged", trace.converged)?;
    dict.set_item("iterations_used", trace.iterations_used)?;
    dict.set_item("objective_values", trace.objective_values)?;
    dict.set_item("step_norms", trace.step_norms)?;
    Ok((Policy { inner: policy }, dict))
}

/// Monte-Carlo estimate of the aggregate vulnerability.
#[pyfunction]
#[pyo3(signature = (network, policy, delta_k, trials, seed, level=0.95))]
fn estimate_ltv<'py>(
    py: Python<'py>,
    network: &Network,
    policy: &Policy,
    delta_k: usize,
    trials: u64,
    seed: u64,
    level: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let est = mc::estimate_ltv(&network.spec, &policy.inner, delta_k, trials, seed, level)
        .map_err(runtime)?;
    to_py(py, &est)
}

/// One reproducible episode; same (seed, trial) always replays identically.
#[pyfunction]
fn simulate_episode<'py>(
    py: Python<'py>,
    network: &Network,
    policy: &Policy,
    delta_k: usize,
    initial: &str,
    seed: u64,
    trial: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let outcome = mc::simulate_episode(
        &network.spec,
        &policy.inner,
        delta_k,
        network.node(initial)?,
        seed,
        trial,
    )
    .map_err(runtime)?;
    to_py(py, &outcome)
}

/// Probability of movement deterrence from `initial`.
#[pyfunction]
fn pomd(network: &Network, initial: &str) -> PyResult<f64> {
    heuristics::pomd(&network.spec, network.node(initial)?).map_err(runtime)
}

/// Vulnerability bound `1 - r^delta_k * (1 - beta_lambda)`.
#[pyfunction]
fn indirect_bound(r: f64, beta_lambda: f64, delta_k: usize) -> f64 {
    heuristics::indirect_bound(r, beta_lambda, delta_k)
}

/// Infinite-horizon limit of the bound along `r = 1 - m * dk^-n`; returns
/// `(limit, regime)` with regime in {"critical", "subcritical",
/// "supercritical"}.
#[pyfunction]
fn toc_limit(m: f64, n: f64, beta_lambda: f64) -> (f64, String) {
    let t = heuristics::toc_limit(m, n, beta_lambda);
    let regime = match t.regime {
        heuristics::Regime::Critical => "critical",
        heuristics::Regime::Subcritical => "subcritical",
        heuristics::Regime::Supercritical => "supercritical",
    };
    (t.limit, regime.to_string())
}

/// Closed-form constants and bounds of the deterministic direct policy.
#[pyfunction]
fn direct_analysis<'py>(
    py: Python<'py>,
    network: &Network,
    initial: &str,
    honeypot: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let a = heuristics::direct_analysis(
        &network.spec,
        network.node(initial)?,
        network.node(honeypot)?,
    )
    .map_err(runtime)?;
    to_py(py, &a)
}

/// Exact trajectory under the direct policy checked against the
/// closed-form sandwich; deviations are listed, not raised.
#[pyfunction]
#[pyo3(signature = (network, initial, honeypot, horizon_cap=10, exact_cap=12))]
fn verify_residue<'py>(
    py: Python<'py>,
    network: &Network,
    initial: &str,
    honeypot: &str,
    horizon_cap: usize,
    exact_cap: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let report = heuristics::verify_residue(
        &network.spec,
        network.node(initial)?,
        network.node(honeypot)?,
        horizon_cap,
        exact_cap,
    )
    .map_err(runtime)?;
    to_py(py, &report)
}

/// Estimates the service-link matrix from `(time, source, destination)`
/// event tuples over fixed windows.
#[pyfunction]
fn estimate_beta<'py>(
    py: Python<'py>,
    events: Vec<(f64, String, String)>,
    window_seconds: f64,
    node_ids: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let events: Vec<latmove_core::auth::AuthEvent> = events
        .into_iter()
        .map(|(time, source, destination)| latmove_core::auth::AuthEvent {
            time,
            source,
            destination,
        })
        .collect();
    let map = node_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.clone(), k))
        .collect();
    let est = latmove_core::auth::estimate_beta(&events, window_seconds, &map, &node_ids)
        .map_err(invalid)?;
    to_py(py, &est)
}

#[pymodule]
fn latmove_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(imminent_vulnerability, m)?)?;
    m.add_function(wrap_pyfunction!(vulnerability_report, m)?)?;
    m.add_function(wrap_pyfunction!(ltv_exact, m)?)?;
    m.add_function(wrap_pyfunction!(ltv_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(probability_of_interference, m)?)?;
    m.add_function(wrap_pyfunction!(stealthiness, m)?)?;
    m.add_function(wrap_pyfunction!(cost_of_roaming, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ltv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_episode, m)?)?;
    m.add_function(wrap_pyfunction!(pomd, m)?)?;
    m.add_function(wrap_pyfunction!(indirect_bound, m)?)?;
    m.add_function(wrap_pyfunction!(toc_limit, m)?)?;
    m.add_function(wrap_pyfunction!(direct_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(verify_residue, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_beta, m)?)?;
    Ok(())
}
