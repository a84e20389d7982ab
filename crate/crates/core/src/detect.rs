//! Generic adapt-then-combine detection skeleton and the distance-based
//! combination weighting shared by its instantiations.

use thiserror::Error;

use crate::graph::Graph;

/// Stand-in exponent for the hard decision limit; saturates double precision
/// safely in the softmax.
pub const HARD_EXPONENT_CAP: f64 = 64.0;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("zeta must be > 0, got {0}")]
    InvalidZeta(f64),
    #[error("exponent must be >= 0, got {0}")]
    InvalidExponent(f64),
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least one neighbor is required")]
    EmptyNeighborhood,
}

/// Distance-to-weight mapping: `alpha = (dist / zeta)^exponent`.
///
/// `exponent = 0` is the uniform decision, a finite positive value is soft,
/// and [`HARD_EXPONENT_CAP`] stands in for the hard limit. `zeta` sets the
/// distance scale and should track the ambient noise level.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightingPolicy {
    pub zeta: f64,
    pub exponent: f64,
}

impl WeightingPolicy {
    pub fn new(zeta: f64, exponent: f64) -> Result<Self, DetectError> {
        if !(zeta > 0.0) {
            return Err(DetectError::InvalidZeta(zeta));
        }
        if !(exponent >= 0.0) {
            return Err(DetectError::InvalidExponent(exponent));
        }
        Ok(Self { zeta, exponent })
    }

    /// Uniform combination regardless of distance.
    pub fn uniform() -> Self {
        Self { zeta: 1.0, exponent: 0.0 }
    }

    /// Hard decision: weight concentrates on neighbors within `zeta`.
    pub fn hard(zeta: f64) -> Result<Self, DetectError> {
        Self::new(zeta, HARD_EXPONENT_CAP)
    }
}

/// One node's view of its neighborhood during a combination step.
#[derive(Debug, Clone)]
pub struct NeighborhoodView<'a> {
    pub self_id: usize,
    pub neighbor_ids: &'a [usize],
    pub estimates: Vec<&'a [f64]>,
}

impl<'a> NeighborhoodView<'a> {
    pub fn new(
        self_id: usize,
        neighbor_ids: &'a [usize],
        estimates: Vec<&'a [f64]>,
    ) -> Result<Self, DetectError> {
        if neighbor_ids.is_empty() {
            return Err(DetectError::EmptyNeighborhood);
        }
        debug_assert_eq!(neighbor_ids.iter().filter(|&&j| j == self_id).count(), 1);
        let len = estimates[0].len();
        for e in &estimates {
            if e.len() != len {
                return Err(DetectError::LengthMismatch(len, e.len()));
            }
        }
        Ok(Self { self_id, neighbor_ids, estimates })
    }
}

/// Per-neighbor convex combination coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights(Vec<f64>);

impl CombinationWeights {
    /// Validates nonnegativity and unit sum (within 1e-9).
    pub fn new(weights: Vec<f64>) -> Result<Self, DetectError> {
        if weights.is_empty() {
            return Err(DetectError::EmptyNeighborhood);
        }
        debug_assert!(weights.iter().all(|&w| w >= 0.0));
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for CombinationWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean distance between two estimates.
pub fn distance(x_i: &[f64], x_j: &[f64]) -> Result<f64, DetectError> {
    if x_i.len() != x_j.len() {
        return Err(DetectError::LengthMismatch(x_i.len(), x_j.len()));
    }
    let sq: f64 = x_i.iter().zip(x_j).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq.sqrt())
}

/// Distance measure `alpha = (dist / zeta)^exponent`; 1 for every distance
/// when the exponent is 0.
pub fn alpha(dist: f64, policy: &WeightingPolicy) -> f64 {
    if policy.exponent == 0.0 {
        return 1.0;
    }
    (dist / policy.zeta).powf(policy.exponent)
}

/// Softmax over negated distance measures, so larger distances get smaller
/// weights. Computed with min-alpha subtraction for numerical stability.
pub fn combine_weights(alphas: &[f64]) -> Result<CombinationWeights, DetectError> {
    if alphas.is_empty() {
        return Err(DetectError::EmptyNeighborhood);
    }
    let min = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = alphas.iter().map(|&a| (-(a - min)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    CombinationWeights::new(exps.into_iter().map(|e| e / sum).collect())
}

/// Distance-weighted convex combination of a neighborhood's estimates.
/// Returns the combined estimate along with the weights used.
pub fn weighted_combination(
    view: &NeighborhoodView<'_>,
    policy: &WeightingPolicy,
) -> Result<(Vec<f64>, CombinationWeights), DetectError> {
    let self_idx = view
        .neighbor_ids
        .iter()
        .position(|&j| j == view.self_id)
        .ok_or(DetectError::EmptyNeighborhood)?;
    let own = view.estimates[self_idx];
    let mut alphas = Vec::with_capacity(view.estimates.len());
    for est in &view.estimates {
        alphas.push(alpha(distance(own, est)?, policy));
    }
    let weights = combine_weights(&alphas)?;
    let mut combined = vec![0.0; own.len()];
    for (w, est) in weights.as_slice().iter().zip(&view.estimates) {
        for (c, &x) in combined.iter_mut().zip(*est) {
            *c += w * x;
        }
    }
    Ok((combined, weights))
}

/// Failure inside the detection loop, tagged with the node and iteration.
#[derive(Debug, Error)]
#[error("detection loop failed at node {node}, iteration {iteration}: {source}")]
pub struct LoopError<E: std::error::Error> {
    pub node: usize,
    pub iteration: usize,
    #[source]
    pub source: E,
}

/// Runs the adapt-then-combine skeleton for `iterations` synchronous rounds.
///
/// Each round first adapts every node from its previous state, then combines
/// the same-round temporaries over each node's neighborhood. The round barrier
/// between the two sweeps is mandatory.
pub fn run_detection_loop<S, E, A, C>(
    graph: &Graph,
    initial: Vec<S>,
    iterations: usize,
    mut adapt: A,
    mut combine: C,
) -> Result<Vec<S>, LoopError<E>>
where
    E: std::error::Error,
    A: FnMut(usize, &S, usize) -> Result<S, E>,
    C: FnMut(usize, &[S], &[usize], usize) -> Result<S, E>,
{
    assert_eq!(initial.len(), graph.n_nodes());
    let neighborhoods: Vec<Vec<usize>> =
        (0..graph.n_nodes()).map(|i| graph.neighbors(i)).collect();
    let mut states = initial;
    for t in 1..=iterations {
        let mut temporaries = Vec::with_capacity(states.len());
        for (i, state) in states.iter().enumerate() {
            temporaries.push(adapt(i, state, t).map_err(|e| LoopError {
                node: i,
                iteration: t,
                source: e,
            })?);
        }
        let mut next = Vec::with_capacity(states.len());
        for i in 0..states.len() {
            next.push(
                combine(i, &temporaries, &neighborhoods[i], t).map_err(|e| LoopError {
                    node: i,
                    iteration: t,
                    source: e,
                })?,
            );
        }
        states = next;
    }
    Ok(states)
}
