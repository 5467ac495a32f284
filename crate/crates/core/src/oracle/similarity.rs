//! Similarity features of the four link-wise encoders, expressed as
//! functions of walk-matrix entries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::event::NodeId;
use crate::scalar::Count;
use crate::scheme::ScoreScheme;

use super::{Horizon, OracleError, WalkMatrixSet, WalkOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimilarityMethod {
    DyGFormer,
    Pint,
    Nat,
    Cawn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFeature<T> {
    pub method: SimilarityMethod,
    pub values: Vec<T>,
}

fn require_count<T>(a: &WalkMatrixSet<T>) -> Result<(), OracleError> {
    if a.scheme().is_count() {
        Ok(())
    } else {
        Err(OracleError::SchemeMismatch { expected: "count", found: a.scheme().to_string() })
    }
}

fn check_nodes<T>(a: &WalkMatrixSet<T>, nodes: [NodeId; 2]) -> Result<(), OracleError> {
    match nodes.into_iter().find(|&x| x as usize >= a.n()) {
        Some(node) => Err(OracleError::NodeOutOfRange { node, n: a.n() }),
        None => Ok(()),
    }
}

/// `[A^(1)_{u,w}]`: the number of direct links before the query time.
pub fn similarity_dygformer<T: Count>(
    a: &WalkMatrixSet<T>,
    u: NodeId,
    w: NodeId,
) -> Result<SimilarityFeature<T>, OracleError> {
    require_count(a)?;
    check_nodes(a, [u, w])?;
    if a.k() < 1 {
        return Err(OracleError::HopOutOfRange { hop: 1, k: a.k() });
    }
    Ok(SimilarityFeature { method: SimilarityMethod::DyGFormer, values: vec![a.entry(1, u, w).clone()] })
}

/// `[A^(0)_{u,w}, ..., A^(k)_{u,w}]` of the count matrices.
pub fn similarity_pint<T: Count>(
    a: &WalkMatrixSet<T>,
    u: NodeId,
    w: NodeId,
) -> Result<SimilarityFeature<T>, OracleError> {
    require_count(a)?;
    check_nodes(a, [u, w])?;
    Ok(SimilarityFeature { method: SimilarityMethod::Pint, values: a.profile(u, w) })
}

/// Entry `j` is 1 iff some walk of at most `j` hops reaches `w` from `u`.
pub fn similarity_nat<T: Count + PartialOrd>(
    a: &WalkMatrixSet<T>,
    u: NodeId,
    w: NodeId,
) -> Result<SimilarityFeature<T>, OracleError> {
    require_count(a)?;
    check_nodes(a, [u, w])?;
    let mut prefix = T::zero();
    let values = a
        .profile(u, w)
        .into_iter()
        .map(|x| {
            prefix = prefix.clone() + x;
            if prefix > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(SimilarityFeature { method: SimilarityMethod::Nat, values })
}

/// Per-hop visit probabilities of causal sampling.
pub fn similarity_cawn<T: Clone>(
    a: &WalkMatrixSet<T>,
    u: NodeId,
    w: NodeId,
) -> Result<SimilarityFeature<T>, OracleError> {
    if !matches!(a.scheme(), ScoreScheme::CawnDecay { .. }) {
        return Err(OracleError::SchemeMismatch { expected: "cawn", found: a.scheme().to_string() });
    }
    check_nodes(a, [u, w])?;
    Ok(SimilarityFeature { method: SimilarityMethod::Cawn, values: a.profile(u, w) })
}

/// Fewest hops of any temporal walk from `u` to each node, up to `max_len`.
///
/// Breadth-first search over `(node, arrival time)` states; independent of
/// the matrix recursion.
pub fn shortest_walk_hops(
    oracle: &WalkOracle,
    u: NodeId,
    max_len: usize,
    horizon: Horizon,
) -> Result<Vec<Option<usize>>, OracleError> {
    if u as usize >= oracle.n() {
        return Err(OracleError::NodeOutOfRange { node: u, n: oracle.n() });
    }
    let graph = oracle.graph();
    let mut best = vec![None; oracle.n()];
    best[u as usize] = Some(0);
    let mut frontier: Vec<usize> = graph.rooted(u, horizon).iter().map(|inc| inc.state).collect();
    let mut seen: HashSet<usize> = HashSet::new();
    for hop in 1..=max_len {
        let mut next = Vec::new();
        for state in frontier.drain(..) {
            if !seen.insert(state) {
                continue;
            }
            let (node, t) = graph.state(state);
            best[node as usize].get_or_insert(hop);
            next.extend(graph.earlier(node, t).iter().map(|inc| inc.state));
        }
        frontier = next;
    }
    Ok(best)
}
