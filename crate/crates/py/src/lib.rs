//! Python bindings for the `linkgame` crate. Results are returned as plain
//! dicts with the same layout as the CLI's report.json.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use linkgame::analysis::{self, OracleOptions, DEFAULT_ORACLE_CAP};
use linkgame::dynamics::{self, SwitchingSchedule, WeightFunction};
use linkgame::graph::{AdversaryAction, DesignerAction, Edge, WeightedGraph};
use linkgame::report;
use linkgame::scenario::{parse_scenario, serialize_scenario, Scenario as CoreScenario};
use linkgame::strategies::{self, GameConfig, GameOrder};

create_exception!(linkgame_py, LinkgameError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    LinkgameError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (report::to_json_string(v),))
}

fn edge_set(pairs: Vec<(usize, usize)>) -> Vec<Edge> {
    pairs.into_iter().map(|(i, j)| Edge::new(i, j)).collect()
}

fn parse_order(order: &str) -> PyResult<GameOrder> {
    match order {
        "min-max" | "minmax" => Ok(GameOrder::MinMax),
        "max-min" | "maxmin" => Ok(GameOrder::MaxMin),
        other => Err(err(format!("unknown order {other:?}; expected \"min-max\" or \"max-min\""))),
    }
}

fn weight_function(alpha: Option<f64>) -> WeightFunction {
    match alpha {
        Some(alpha) => WeightFunction::ExponentialDecay { alpha },
        None => WeightFunction::Constant,
    }
}

/// Connected undirected graph with positive edge weights. Nodes are 0-based.
#[pyclass(name = "Graph", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(nodes: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: WeightedGraph::new(nodes, edges).map_err(err)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Edges as `(i, j, weight)` with `i < j`.
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .edges()
            .iter()
            .zip(self.inner.weights())
            .map(|(e, w)| (e.i, e.j, *w))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Parsed scenario file.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: parse_scenario(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {path}: {e}")))?;
        Self::parse(&text)
    }

    fn to_text(&self) -> String {
        serialize_scenario(&self.inner)
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.graph.clone(),
        }
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.inner.x0.clone()
    }

    /// Runs one CLI command (`simulate`, `minmax`, `maxmin`, `spe-check`,
    /// `oracle`, `mp-check`, `horizon`) and writes its report into `out_dir`.
    /// Returns the one-line summary.
    #[pyo3(signature = (command, out_dir = "."))]
    fn run(&self, command: &str, out_dir: &str) -> PyResult<String> {
        use linkgame::cli::{run_command, Command, RunOptions};
        let cmd = match command {
            "simulate" => Command::Simulate,
            "minmax" => Command::Minmax,
            "maxmin" => Command::Maxmin,
            "spe-check" => Command::SpeCheck,
            "oracle" => Command::Oracle,
            "mp-check" => Command::MpCheck,
            "horizon" => Command::Horizon,
            other => return Err(err(format!("unknown command {other:?}"))),
        };
        let opts = RunOptions {
            out_dir: out_dir.into(),
            ..RunOptions::default()
        };
        run_command(cmd, &self.inner, &opts).map_err(err)
    }
}

/// Simulates the network under one fixed action pair and returns the final
/// state, utility and dissipation.
#[pyfunction]
#[pyo3(signature = (graph, x0, horizon, broken = vec![], boosted = vec![], boost = 0.0, alpha = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    x0: Vec<f64>,
    horizon: f64,
    broken: Vec<(usize, usize)>,
    boosted: Vec<(usize, usize)>,
    boost: f64,
    alpha: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let g = &graph.inner;
    let u = AdversaryAction::new(g, edge_set(broken.clone()), broken.len()).map_err(err)?;
    let v = DesignerAction::new(g, edge_set(boosted.clone()), boost, boosted.len()).map_err(err)?;
    let schedule = SwitchingSchedule::constant(horizon, u, v, horizon).map_err(err)?;
    let traj = dynamics::simulate(g, &schedule, &x0).map_err(err)?;
    let k = weight_function(alpha);
    let quad = linkgame::quadrature::GaussLegendre::new(dynamics::DEFAULT_QUAD_NODES);
    let out = serde_json::json!({
        "final_state": traj.final_state().iter().map(|x| report::num(*x)).collect::<Vec<_>>(),
        "utility": report::num(dynamics::utility(&traj, &k, &quad)),
        "dissipation": report::num(dynamics::dissipation(&traj, &k, &quad)),
    });
    to_py(py, &out)
}

fn config(horizon: f64, budget: usize, boost: f64, dwell: f64, rho: Option<f64>, alpha: Option<f64>) -> GameConfig {
    let mut cfg = GameConfig::new(horizon, budget, boost, dwell);
    cfg.rho = rho;
    cfg.weight = weight_function(alpha);
    cfg
}

/// Plays the closed-form game in the given order (`"min-max"` or `"max-min"`).
#[pyfunction]
#[pyo3(signature = (graph, x0, horizon, budget, boost, dwell, order = "min-max", rho = None, alpha = None, nu_override = None))]
#[allow(clippy::too_many_arguments)]
fn play<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    x0: Vec<f64>,
    horizon: f64,
    budget: usize,
    boost: f64,
    dwell: f64,
    order: &str,
    rho: Option<f64>,
    alpha: Option<f64>,
    nu_override: Option<Vec<(usize, usize, f64)>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(horizon, budget, boost, dwell, rho, alpha);
    let overrides: Option<BTreeMap<Edge, f64>> =
        nu_override.map(|v| v.into_iter().map(|(i, j, nu)| (Edge::new(i, j), nu)).collect());
    let g = &graph.inner;
    let out = match parse_order(order)? {
        GameOrder::MinMax => strategies::play_minmax(g, &x0, &cfg, overrides.as_ref()),
        GameOrder::MaxMin => strategies::play_maxmin(g, &x0, &cfg, overrides.as_ref()),
    }
    .map_err(err)?;
    to_py(py, &report::outcome_report(&out, None))
}

/// Checks the sufficient condition for equal game values.
#[pyfunction]
fn spe_condition<'py>(py: Python<'py>, graph: &PyGraph, boost: f64, eps: f64, x0: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let r = analysis::spe_condition(&graph.inner, boost, eps, &x0).map_err(err)?;
    to_py(py, &report::spe_report(&r, boost, eps))
}

/// Horizon bound on the free (unattacked) flow.
#[pyfunction]
fn horizon_bound<'py>(py: Python<'py>, graph: &PyGraph, x0: Vec<f64>, eps: f64) -> PyResult<Bound<'py, PyAny>> {
    let h = analysis::horizon_bound(&graph.inner, &x0, eps).map_err(err)?;
    to_py(py, &report::horizon_report(&h, eps))
}

/// Exhaustive game value in the given order.
#[pyfunction]
#[pyo3(signature = (graph, x0, horizon, budget, boost, dwell, order = "min-max", cap = DEFAULT_ORACLE_CAP, sub_budget = false))]
#[allow(clippy::too_many_arguments)]
fn oracle_game_value<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    x0: Vec<f64>,
    horizon: f64,
    budget: usize,
    boost: f64,
    dwell: f64,
    order: &str,
    cap: u128,
    sub_budget: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(horizon, budget, boost, dwell, None, None);
    let opts = OracleOptions { cap, sub_budget };
    let r = analysis::oracle_game_value(&graph.inner, &x0, &cfg, parse_order(order)?, &opts).map_err(err)?;
    to_py(py, &report::oracle_value_report(&r))
}

#[pymodule]
pub fn linkgame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LinkgameError", m.py().get_type::<LinkgameError>())?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(play, m)?)?;
    m.add_function(wrap_pyfunction!(spe_condition, m)?)?;
    m.add_function(wrap_pyfunction!(horizon_bound, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_game_value, m)?)?;
    Ok(())
}
