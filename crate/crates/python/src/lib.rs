//! Python bindings over the coopnet core: formula-level operations plus
//! whole-experiment entry points driven by the same TOML configs as the CLI.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use coopnet::config::parse_config;
use coopnet::detect::{self, WeightingPolicy};
use coopnet::graph::{
    count_walks as core_count_walks, expected_paths as core_expected_paths,
    monte_carlo_paths as core_monte_carlo, Graph, GraphSpec, PathCase, PathCountQuery,
};
use coopnet::lms::{self, TargetSignal};
use coopnet::marl;
use coopnet::seed::derive_seed as core_derive_seed;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_case(case: &str) -> PyResult<PathCase> {
    match case {
        "no-loops" => Ok(PathCase::NoLoops),
        "no-self-loops" => Ok(PathCase::NoSelfLoops),
        "general" => Ok(PathCase::General),
        other => Err(value_err(format!(
            "unknown case `{other}`; expected no-loops, no-self-loops, or general"
        ))),
    }
}

/// Expected number of length-`length` paths between two nodes of an N-node
/// graph with `avg_neighbors` average neighbors, for one walk class.
#[pyfunction]
fn expected_paths(case: &str, n_nodes: usize, avg_neighbors: f64, length: usize) -> PyResult<f64> {
    let q = PathCountQuery::new(parse_case(case)?, n_nodes, avg_neighbors, length)
        .map_err(value_err)?;
    Ok(core_expected_paths(&q))
}

/// Exhaustive walk count between `source` and `target` on an explicit
/// boolean adjacency matrix.
#[pyfunction]
fn count_walks(
    adjacency: Vec<Vec<bool>>,
    source: usize,
    target: usize,
    length: usize,
    case: &str,
) -> PyResult<u64> {
    let n = adjacency.len();
    let mut flat = Vec::with_capacity(n * n);
    for row in &adjacency {
        if row.len() != n {
            return Err(value_err("adjacency matrix must be square"));
        }
        flat.extend_from_slice(row);
    }
    let graph = Graph::from_adjacency(n, flat).map_err(value_err)?;
    core_count_walks(&graph, source, target, length, parse_case(case)?).map_err(value_err)
}

/// Monte Carlo mean path count over random graphs with the given size and
/// link probability.
#[pyfunction]
fn monte_carlo_paths(
    n_nodes: usize,
    link_probability: f64,
    length: usize,
    case: &str,
    trials: u64,
    seed: u64,
) -> PyResult<f64> {
    let spec = GraphSpec::new(n_nodes, link_probability).map_err(value_err)?;
    core_monte_carlo(&spec, length, parse_case(case)?, trials, seed).map_err(value_err)
}

/// Euclidean distance between two estimate vectors.
#[pyfunction]
fn distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    detect::distance(&a, &b).map_err(value_err)
}

/// Distance measure `(dist / zeta) ** exponent`.
#[pyfunction]
fn alpha(dist: f64, zeta: f64, exponent: f64) -> PyResult<f64> {
    let policy = WeightingPolicy::new(zeta, exponent).map_err(value_err)?;
    Ok(detect::alpha(dist, &policy))
}

/// Softmax combination weights from raw distances.
#[pyfunction]
fn combine_weights(distances: Vec<f64>, zeta: f64, exponent: f64) -> PyResult<Vec<f64>> {
    let policy = WeightingPolicy::new(zeta, exponent).map_err(value_err)?;
    let alphas: Vec<f64> = distances.iter().map(|&d| detect::alpha(d, &policy)).collect();
    Ok(detect::combine_weights(&alphas)
        .map_err(value_err)?
        .as_slice()
        .to_vec())
}

/// Mean square deviation of an estimate from the target vector.
#[pyfunction]
fn msd(x: Vec<f64>, target: Vec<f64>) -> f64 {
    lms::msd(&x, &TargetSignal { values: target, sparsity: 0.0 })
}

/// Exploration rate after `step` with an exponential decay schedule.
#[pyfunction]
fn epsilon(step: u64, eps_min: f64, eps_max: f64, decay_rate: f64) -> PyResult<f64> {
    let params = marl::LearningParams {
        learning_rate: 1.0,
        discount: 0.0,
        eps_min,
        eps_max,
        decay_rate,
        max_steps: 1,
        n_episodes: 1,
    };
    params.validate().map_err(value_err)?;
    Ok(marl::epsilon(step, &params))
}

/// Combination weights over `neighbor_ids` after detecting `detected`
/// (or uniform when `detected` is None).
#[pyfunction]
#[pyo3(signature = (neighbor_ids, detected, lambda_))]
fn adjust_weights(
    neighbor_ids: Vec<usize>,
    detected: Option<usize>,
    lambda_: f64,
) -> PyResult<Vec<f64>> {
    Ok(marl::adjust_weights(&neighbor_ids, detected, lambda_)
        .map_err(value_err)?
        .as_slice()
        .to_vec())
}

/// Stable per-trial seed derived from a master seed.
#[pyfunction]
fn derive_seed(master: u64, index: u64) -> u64 {
    core_derive_seed(master, index)
}

/// Runs a diffusion experiment from TOML config text; returns a dict with
/// the intact-node MSD series (dB) and its steady-state mean.
#[pyfunction]
fn run_diffusion(py: Python<'_>, config_text: &str, seed: u64) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_text).map_err(value_err)?;
    let lms_config = config.diffusion_config().to_lms_config();
    let experiment = lms::run_experiment(&lms_config, seed).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("intact_mean_db", experiment.msd.intact_mean_db.clone())?;
    out.set_item(
        "steady_state_intact_db",
        experiment.msd.steady_state_intact_db(0.1),
    )?;
    out.set_item("impaired_node", experiment.msd.impaired_node)?;
    Ok(out.into())
}

/// Runs one multi-agent training run from TOML config text; returns success
/// rates with and without detection plus the detection accuracy.
#[pyfunction]
fn run_marl(py: Python<'_>, config_text: &str, seed: u64) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_text).map_err(value_err)?;
    let m = config.marl_config();
    let world = match &m.layout {
        Some(text) => marl::GridWorld::from_text(text).map_err(value_err)?,
        None => marl::GridWorld::standard_8x8(),
    };
    let params = m.learning_params();
    let voting = m.voting_config();
    let arm = |detection: bool| {
        marl::run_marl(
            &world,
            &params,
            &voting,
            m.n_agents,
            m.broken_agent,
            detection,
            m.eval_episodes,
            seed,
        )
        .map_err(value_err)
    };
    let on = arm(true)?;
    let off = arm(false)?;
    let out = PyDict::new(py);
    out.set_item("success_with_detection", on.success_rate)?;
    out.set_item("success_without_detection", off.success_rate)?;
    out.set_item("detection_accuracy", on.detection_accuracy(m.warmup_episodes))?;
    Ok(out.into())
}

#[pymodule]
fn coopnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(expected_paths, m)?)?;
    m.add_function(wrap_pyfunction!(count_walks, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_paths, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(alpha, m)?)?;
    m.add_function(wrap_pyfunction!(combine_weights, m)?)?;
    m.add_function(wrap_pyfunction!(msd, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(adjust_weights, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(run_marl, m)?)?;
    Ok(())
}
