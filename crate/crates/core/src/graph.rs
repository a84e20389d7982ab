//! Random-graph generation, row normalization, and expected path-count
//! formulas with exhaustive and Monte Carlo oracles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("invalid path-count query: {0}")]
    InvalidQuery(String),
    #[error("walk counting requires source != target (got node {0})")]
    SameEndpoints(usize),
    #[error("walk counting supports at most 128 nodes (got {0})")]
    TooManyNodes(usize),
}

/// Parameters of the random graph: `N` nodes, per-pair edge probability `rho`.
///
/// `rho` is identified with the paper's link-existence probability `s`, so the
/// average neighbor count is `M = rho * (N - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n_nodes: usize,
    pub link_probability: f64,
}

impl GraphSpec {
    pub fn new(n_nodes: usize, link_probability: f64) -> Result<Self, GraphError> {
        if n_nodes < 2 {
            return Err(GraphError::InvalidSpec(format!(
                "n_nodes must be >= 2, got {n_nodes}"
            )));
        }
        if !(0.0..=1.0).contains(&link_probability) {
            return Err(GraphError::InvalidSpec(format!(
                "link_probability must lie in [0, 1], got {link_probability}"
            )));
        }
        Ok(Self {
            n_nodes,
            link_probability,
        })
    }

    /// Average neighbor count `M = rho * (N - 1)` implied by the spec.
    pub fn avg_neighbors(&self) -> f64 {
        self.link_probability * (self.n_nodes as f64 - 1.0)
    }
}

/// Symmetric adjacency over `N` nodes. The diagonal is always true: every node
/// is its own neighbor, matching the combination steps downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<bool>,
}

impl Graph {
    /// Builds a graph from an explicit adjacency matrix, symmetrizing is NOT
    /// performed; the input must already be symmetric with a true diagonal.
    pub fn from_adjacency(n_nodes: usize, adjacency: Vec<bool>) -> Result<Self, GraphError> {
        if adjacency.len() != n_nodes * n_nodes {
            return Err(GraphError::InvalidSpec(format!(
                "adjacency length {} does not match {n_nodes} nodes",
                adjacency.len()
            )));
        }
        let g = Self { n_nodes, adjacency };
        for i in 0..n_nodes {
            if !g.has_edge(i, i) {
                return Err(GraphError::InvalidSpec(format!(
                    "diagonal entry ({i},{i}) must be true"
                )));
            }
            for j in 0..i {
                if g.has_edge(i, j) != g.has_edge(j, i) {
                    return Err(GraphError::InvalidSpec(format!(
                        "adjacency must be symmetric; ({i},{j}) differs from ({j},{i})"
                    )));
                }
            }
        }
        Ok(g)
    }

    /// Complete graph on `n` nodes (self-loops included).
    pub fn complete(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            adjacency: vec![true; n_nodes * n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_nodes + j]
    }

    /// Neighbor ids of node `i` in increasing order; always contains `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n_nodes).filter(|&j| self.has_edge(i, j)).count()
    }

    /// Number of off-diagonal edges (unordered pairs).
    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n_nodes {
            for j in 0..i {
                if self.has_edge(i, j) {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Row-normalized adjacency: nonnegative weights supported on the adjacency,
/// each row summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RowStochasticMatrix {
    n_nodes: usize,
    weights: Vec<f64>,
}

impl RowStochasticMatrix {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_nodes + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_nodes..(i + 1) * self.n_nodes]
    }
}

/// The three walk classes of the path-count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathCase {
    /// Simple paths: no node repeats.
    NoLoops,
    /// Walks that never take a self-loop step; revisits are allowed.
    NoSelfLoops,
    /// Unrestricted walks, self-loop steps included.
    General,
}

impl PathCase {
    pub const ALL: [PathCase; 3] = [PathCase::NoLoops, PathCase::NoSelfLoops, PathCase::General];

    pub fn label(&self) -> &'static str {
        match self {
            PathCase::NoLoops => "no-loops",
            PathCase::NoSelfLoops => "no-self-loops",
            PathCase::General => "general",
        }
    }
}

impl std::fmt::Display for PathCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Query for the expected number of length-`K` paths between two arbitrary
/// nodes in a graph with `N` nodes and `M` average neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCountQuery {
    pub case: PathCase,
    pub n_nodes: usize,
    pub avg_neighbors: f64,
    pub length: usize,
}

impl PathCountQuery {
    pub fn new(
        case: PathCase,
        n_nodes: usize,
        avg_neighbors: f64,
        length: usize,
    ) -> Result<Self, GraphError> {
        if length < 1 {
            return Err(GraphError::InvalidQuery("length must be >= 1".into()));
        }
        if n_nodes < 2 {
            return Err(GraphError::InvalidQuery(format!(
                "n_nodes must be >= 2, got {n_nodes}"
            )));
        }
        let q = Self {
            case,
            n_nodes,
            avg_neighbors,
            length,
        };
        let s = q.edge_probability();
        if !(0.0..=1.0).contains(&s) {
            return Err(GraphError::InvalidQuery(format!(
                "s = M/(N-1) = {s} lies outside [0, 1]"
            )));
        }
        if length > 1 {
            let p = q.continuation_probability();
            if !(0.0..=1.0).contains(&p) {
                return Err(GraphError::InvalidQuery(format!(
                    "p = (M-1)/(N-2) = {p} lies outside [0, 1]"
                )));
            }
        }
        Ok(q)
    }

    /// `s = M / (N - 1)`.
    pub fn edge_probability(&self) -> f64 {
        self.avg_neighbors / (self.n_nodes as f64 - 1.0)
    }

    /// `p = (M - 1) / (N - 2)`.
    pub fn continuation_probability(&self) -> f64 {
        (self.avg_neighbors - 1.0) / (self.n_nodes as f64 - 2.0)
    }
}

/// Draws an Erdos-Renyi graph: each unordered off-diagonal pair is an edge
/// independently with `link_probability`; the diagonal is forced true.
pub fn generate_graph<R: Rng + ?Sized>(spec: &GraphSpec, rng: &mut R) -> Graph {
    let n = spec.n_nodes;
    let mut adjacency = vec![false; n * n];
    for i in 0..n {
        adjacency[i * n + i] = true;
        for j in 0..i {
            if rng.random::<f64>() < spec.link_probability {
                adjacency[i * n + j] = true;
                adjacency[j * n + i] = true;
            }
        }
    }
    Graph { n_nodes: n, adjacency }
}

/// Divides each adjacency row by its count of true entries. The self-loop
/// guarantees a nonzero divisor.
pub fn row_normalize(g: &Graph) -> RowStochasticMatrix {
    let n = g.n_nodes();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        let deg = g.degree(i) as f64;
        for j in 0..n {
            if g.has_edge(i, j) {
                weights[i * n + j] = 1.0 / deg;
            }
        }
    }
    RowStochasticMatrix { n_nodes: n, weights }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Expected number of length-`K` paths between two arbitrary nodes, per the
/// closed-form table. `K = 1` yields `s` for every case.
pub fn expected_paths(q: &PathCountQuery) -> f64 {
    let s = q.edge_probability();
    if q.length == 1 {
        return s;
    }
    let n = q.n_nodes;
    let k = q.length;
    let p = q.continuation_probability();
    match q.case {
        PathCase::NoLoops => falling_factorial(n - 2, k - 1) * s * p.powi((k - 1) as i32),
        PathCase::NoSelfLoops => {
            ((n - 2) as f64).powi((k - 1) as i32) * s.powi((k - 1) as i32) * p
        }
        PathCase::General => (0..k)
            .map(|l| {
                let e = (k - l - 1) as i32;
                ((n - 2) as f64).powi(e) * s.powi(e) * p
            })
            .sum(),
    }
}

/// Exact number of length-`length` walks from `source` to `target`, restricted
/// per `case`, by exhaustive enumeration.
pub fn count_walks(
    g: &Graph,
    source: usize,
    target: usize,
    length: usize,
    case: PathCase,
) -> Result<u64, GraphError> {
    if source == target {
        return Err(GraphError::SameEndpoints(source));
    }
    if length < 1 {
        return Err(GraphError::InvalidQuery("length must be >= 1".into()));
    }
    if g.n_nodes() > 128 {
        return Err(GraphError::TooManyNodes(g.n_nodes()));
    }
    let visited: u128 = 1u128 << source;
    Ok(walk_rec(g, source, target, length, case, visited))
}

fn walk_rec(
    g: &Graph,
    current: usize,
    target: usize,
    remaining: usize,
    case: PathCase,
    visited: u128,
) -> u64 {
    if remaining == 1 {
        let ok = g.has_edge(current, target)
            && match case {
                PathCase::NoLoops => visited & (1u128 << target) == 0,
                PathCase::NoSelfLoops => current != target,
                PathCase::General => true,
            };
        return ok as u64;
    }
    let mut count = 0;
    for next in 0..g.n_nodes() {
        if !g.has_edge(current, next) {
            continue;
        }
        let allowed = match case {
            PathCase::NoLoops => visited & (1u128 << next) == 0,
            PathCase::NoSelfLoops => next != current,
            PathCase::General => true,
        };
        if allowed {
            count += walk_rec(g, next, target, remaining - 1, case, visited | (1u128 << next));
        }
    }
    count
}

/// Endpoints used by the Monte Carlo path estimators. The graph distribution
/// is exchangeable, so any fixed pair gives the same expectation.
pub const MC_SOURCE: usize = 0;
pub const MC_TARGET: usize = 1;

/// Mean of [`count_walks`] over `trials` independently generated graphs,
/// between the fixed node pair (0, 1).
///
/// Trials run in parallel with per-trial derived seeds; the result is
/// independent of thread count.
pub fn monte_carlo_paths(
    spec: &GraphSpec,
    length: usize,
    case: PathCase,
    trials: u64,
    master_seed: u64,
) -> Result<f64, GraphError> {
    if trials < 1 {
        return Err(GraphError::InvalidQuery("trials must be >= 1".into()));
    }
    let total: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, t));
            let g = generate_graph(spec, &mut rng);
            count_walks(&g, MC_SOURCE, MC_TARGET, length, case).expect("valid query")
        })
        .sum();
    Ok(total as f64 / trials as f64)
}

/// Monte Carlo means for every (length, case) pair over one shared set of
/// `trials` sampled graphs. Row order follows `lengths` x `PathCase::ALL`.
pub fn monte_carlo_paths_grid(
    spec: &GraphSpec,
    lengths: &[usize],
    trials: u64,
    master_seed: u64,
) -> Result<Vec<(usize, PathCase, f64)>, GraphError> {
    if trials < 1 {
        return Err(GraphError::InvalidQuery("trials must be >= 1".into()));
    }
    let n_cells = lengths.len() * PathCase::ALL.len();
    let totals: Vec<u64> = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; n_cells],
            |mut acc, t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, t));
                let g = generate_graph(spec, &mut rng);
                let mut cell = 0;
                for &k in lengths {
                    for case in PathCase::ALL {
                        acc[cell] +=
                            count_walks(&g, MC_SOURCE, MC_TARGET, k, case).expect("valid query");
                        cell += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n_cells],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut out = Vec::with_capacity(n_cells);
    let mut cell = 0;
    for &k in lengths {
        for case in PathCase::ALL {
            out.push((k, case, totals[cell] as f64 / trials as f64));
            cell += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::complete(3)
    }

    #[test]
    fn spec_rejects_degenerate_inputs() {
        assert!(GraphSpec::new(1, 0.5).is_err());
        assert!(GraphSpec::new(5, -0.1).is_err());
        assert!(GraphSpec::new(5, 1.1).is_err());
    }

    #[test]
    fn probability_one_gives_complete_graph() {
        let spec = GraphSpec::new(5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = generate_graph(&spec, &mut rng);
        assert_eq!(g, Graph::complete(5));
    }

    #[test]
    fn probability_zero_gives_self_loops_only() {
        let spec = GraphSpec::new(5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = generate_graph(&spec, &mut rng);
        for i in 0..5 {
            assert_eq!(g.neighbors(i), vec![i]);
        }
    }

    #[test]
    fn mean_edge_count_matches_binomial() {
        // 10^4 samples at N=50, rho=0.1: mean off-diagonal edges ~ 122.5 +/- 3.
        let spec = GraphSpec::new(50, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let total: usize = (0..10_000).map(|_| generate_graph(&spec, &mut rng).edge_count()).sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean - 122.5).abs() < 3.0, "mean edge count {mean}");
    }

    proptest! {
        #[test]
        fn generated_graphs_are_symmetric_with_unit_diagonal(
            n in 2usize..20, rho in 0.0f64..=1.0, seed in any::<u64>()
        ) {
            let spec = GraphSpec::new(n, rho).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate_graph(&spec, &mut rng);
            for i in 0..n {
                prop_assert!(g.has_edge(i, i));
                for j in 0..n {
                    prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                }
            }
        }

        #[test]
        fn row_normalize_rows_sum_to_one(
            n in 2usize..15, rho in 0.0f64..=1.0, seed in any::<u64>()
        ) {
            let spec = GraphSpec::new(n, rho).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate_graph(&spec, &mut rng);
            let m = row_normalize(&g);
            for i in 0..n {
                let sum: f64 = m.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                for j in 0..n {
                    prop_assert_eq!(m.weight(i, j) != 0.0, g.has_edge(i, j));
                }
            }
        }

        #[test]
        fn expected_paths_length_one_is_s(
            n in 3usize..40, m in 2.0f64..10.0
        ) {
            prop_assume!(m <= n as f64 - 1.0);
            for case in PathCase::ALL {
                let q = PathCountQuery::new(case, n, m, 1).unwrap();
                let s = m / (n as f64 - 1.0);
                prop_assert!((expected_paths(&q) - s).abs() < 1e-12);
            }
        }

        #[test]
        fn walk_classes_are_monotone(
            n in 3usize..8, rho in 0.0f64..=1.0, seed in any::<u64>(), k in 1usize..4
        ) {
            let spec = GraphSpec::new(n, rho).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate_graph(&spec, &mut rng);
            let nl = count_walks(&g, 0, 1, k, PathCase::NoLoops).unwrap();
            let ns = count_walks(&g, 0, 1, k, PathCase::NoSelfLoops).unwrap();
            let ge = count_walks(&g, 0, 1, k, PathCase::General).unwrap();
            prop_assert!(nl <= ns && ns <= ge);
        }
    }

    #[test]
    fn row_normalize_examples() {
        // identity adjacency -> identity matrix
        let spec = GraphSpec::new(4, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = generate_graph(&spec, &mut rng);
        let m = row_normalize(&g);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.weight(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        // complete graph N=4 -> all entries 1/4
        let m = row_normalize(&Graph::complete(4));
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(m.weight(i, j), 0.25);
            }
        }
        // row [1,1,0,1] -> [1/3, 1/3, 0, 1/3]
        #[rustfmt::skip]
        let adj = vec![
            true,  true,  false, true,
            true,  true,  false, false,
            false, false, true,  false,
            true,  false, false, true,
        ];
        let g = Graph::from_adjacency(4, adj).unwrap();
        let m = row_normalize(&g);
        assert_eq!(m.row(0), &[1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn expected_paths_tabulated_values() {
        // K=1, N=10, M=3 -> s = 1/3 for every case.
        for case in PathCase::ALL {
            let q = PathCountQuery::new(case, 10, 3.0, 1).unwrap();
            assert_relative_eq!(expected_paths(&q), 1.0 / 3.0, max_relative = 1e-12);
        }
        // NoLoops, K=2, N=4, M=2 -> P(2,1) * (2/3) * (1/2) = 2/3.
        let q = PathCountQuery::new(PathCase::NoLoops, 4, 2.0, 2).unwrap();
        assert_relative_eq!(expected_paths(&q), 2.0 / 3.0, max_relative = 1e-12);
        // General, K=2, N=4, M=2 -> 2*(2/3)*(1/2) + 1/2 = 7/6.
        let q = PathCountQuery::new(PathCase::General, 4, 2.0, 2).unwrap();
        assert_relative_eq!(expected_paths(&q), 7.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn query_validation() {
        assert!(PathCountQuery::new(PathCase::General, 10, 3.0, 0).is_err());
        // M > N-1 drives s outside [0,1].
        assert!(PathCountQuery::new(PathCase::General, 10, 10.0, 2).is_err());
        // M < 1 drives p negative for K > 1.
        assert!(PathCountQuery::new(PathCase::General, 10, 0.5, 2).is_err());
    }

    #[test]
    fn triangle_walk_counts() {
        let g = triangle();
        assert_eq!(count_walks(&g, 0, 1, 2, PathCase::NoLoops).unwrap(), 1);
        assert_eq!(count_walks(&g, 0, 1, 2, PathCase::NoSelfLoops).unwrap(), 1);
        assert_eq!(count_walks(&g, 0, 1, 2, PathCase::General).unwrap(), 3);
    }

    #[test]
    fn count_walks_rejects_same_endpoints() {
        assert!(matches!(
            count_walks(&triangle(), 1, 1, 2, PathCase::General),
            Err(GraphError::SameEndpoints(1))
        ));
    }

    #[test]
    fn complete_graph_no_loops_formula_is_exact() {
        // rho=1 means M=N-1, p=s=1; the closed form equals the exact simple
        // path count P(N-2, K-1).
        for n in [4usize, 6, 8] {
            let g = Graph::complete(n);
            for k in 1..4 {
                let q = PathCountQuery::new(PathCase::NoLoops, n, n as f64 - 1.0, k).unwrap();
                let exact = count_walks(&g, 0, 1, k, PathCase::NoLoops).unwrap() as f64;
                assert_relative_eq!(expected_paths(&q), exact, max_relative = 1e-12);
                assert_relative_eq!(exact, falling_factorial(n - 2, k - 1), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_degenerate_cases() {
        // rho=1: deterministic, equals the complete-graph count.
        let spec = GraphSpec::new(6, 1.0).unwrap();
        let mc = monte_carlo_paths(&spec, 3, PathCase::General, 10, 99).unwrap();
        let exact = count_walks(&Graph::complete(6), 0, 1, 3, PathCase::General).unwrap() as f64;
        assert_eq!(mc, exact);
        // rho=0: no cross edges exist.
        let spec = GraphSpec::new(6, 0.0).unwrap();
        let mc = monte_carlo_paths(&spec, 2, PathCase::NoLoops, 100, 99).unwrap();
        assert_eq!(mc, 0.0);
    }

    #[test]
    fn monte_carlo_matches_er_expectation() {
        // Independent check of the sampler itself: at N=20, M=4 (rho=4/19),
        // the expected number of simple 2-paths from 0 to 1 is 18 * rho^2.
        let rho: f64 = 4.0 / 19.0;
        let spec = GraphSpec::new(20, rho).unwrap();
        let mc = monte_carlo_paths(&spec, 2, PathCase::NoLoops, 100_000, 5).unwrap();
        let analytic = 18.0 * rho * rho;
        assert!(
            (mc - analytic).abs() / analytic < 0.03,
            "mc={mc} analytic={analytic}"
        );
    }

    #[test]
    fn grid_agrees_with_single_estimator() {
        let spec = GraphSpec::new(10, 0.5).unwrap();
        let grid = monte_carlo_paths_grid(&spec, &[1, 2], 2_000, 11).unwrap();
        for (k, case, mean) in grid {
            let single = monte_carlo_paths(&spec, k, case, 2_000, 11).unwrap();
            assert_relative_eq!(mean, single, max_relative = 1e-12);
        }
    }
}
