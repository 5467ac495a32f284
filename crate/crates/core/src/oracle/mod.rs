//! Exact temporal walk matrices by exhaustive walk enumeration.
//!
//! This is the ground truth the sketch engine is validated against. It
//! stores `(k+1)` dense `n x n` matrices and is only meant for small
//! instances (a few hundred nodes, a few thousand events).

mod matrices;
mod sampling;
mod similarity;
mod walks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{InteractionEvent, NodeId};

pub use matrices::{enumerate_walks, exact_matrices, WalkMatrixSet, WalkOracle};
pub use sampling::{sample_cawn_walk, visit_frequencies};
pub use similarity::{
    shortest_walk_hops, similarity_cawn, similarity_dygformer, similarity_nat, similarity_pint, SimilarityFeature,
    SimilarityMethod,
};
pub use walks::TemporalWalk;

/// Default cap on the number of walks an oracle call may enumerate.
pub const DEFAULT_WALK_CAP: u64 = 10_000_000;

/// Cap on `arrival states x n x k` scalars held by the walk recursion.
pub const CELL_CAP: u128 = 200_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("walk enumeration exceeds the cap of {cap} walks")]
    WalkExplosion { cap: u64 },
    #[error("the walk recursion needs {cells} table cells, above the limit of {limit}")]
    InstanceTooLarge { cells: u128, limit: u128 },
    #[error("node {node} is outside the oracle's node range 0..{n}")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("feature requires {expected} matrices, found {found}")]
    SchemeMismatch { expected: &'static str, found: String },
    #[error("hop {hop} is outside 0..={k}")]
    HopOutOfRange { hop: usize, k: usize },
}

/// Which events a walk rooted at the query time may start with.
///
/// `Before(t)` admits events strictly earlier than `t` (the snapshot
/// `G(t)`); `Through(t)` also admits events stamped exactly `t`, i.e. the
/// state right after the events at `t` have been applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Before(f64),
    Through(f64),
}

impl Horizon {
    /// The state immediately after the last event of `events`.
    pub fn after_last(events: &[InteractionEvent]) -> Self {
        Horizon::Through(events.last().map_or(0.0, |e| e.t))
    }

    pub fn time(&self) -> f64 {
        match *self {
            Horizon::Before(t) | Horizon::Through(t) => t,
        }
    }

    #[inline]
    pub fn admits(&self, t: f64) -> bool {
        match *self {
            Horizon::Before(h) => t < h,
            Horizon::Through(h) => t <= h,
        }
    }
}

/// One side of an interaction, seen from a node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Incidence {
    pub other: NodeId,
    pub t: f64,
    /// Arrival state index `2 * event + side` of `other`.
    pub state: usize,
}

/// Per-node incidence lists in chronological order.
#[derive(Clone, Debug)]
pub(crate) struct TemporalGraph {
    adj: Vec<Vec<Incidence>>,
    state_nodes: Vec<NodeId>,
    state_times: Vec<f64>,
}

impl TemporalGraph {
    pub fn new(events: &[InteractionEvent], n: usize) -> Result<Self, OracleError> {
        let mut adj = vec![Vec::new(); n];
        for (i, e) in events.iter().enumerate() {
            for node in [e.u, e.v] {
                if node as usize >= n {
                    return Err(OracleError::NodeOutOfRange { node, n });
                }
            }
            adj[e.u as usize].push(Incidence { other: e.v, t: e.t, state: 2 * i + 1 });
            adj[e.v as usize].push(Incidence { other: e.u, t: e.t, state: 2 * i });
        }
        for list in &mut adj {
            list.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        let state_nodes = events.iter().flat_map(|e| [e.u, e.v]).collect();
        let state_times = events.iter().flat_map(|e| [e.t, e.t]).collect();
        Ok(Self { adj, state_nodes, state_times })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn states(&self) -> usize {
        self.state_nodes.len()
    }

    /// Node and time of an arrival state.
    #[inline]
    pub fn state(&self, state: usize) -> (NodeId, f64) {
        (self.state_nodes[state], self.state_times[state])
    }

    /// Incidences of `node` usable as the first step of a rooted walk.
    pub fn rooted(&self, node: NodeId, horizon: Horizon) -> &[Incidence] {
        let list = &self.adj[node as usize];
        &list[..list.partition_point(|inc| horizon.admits(inc.t))]
    }

    /// Incidences of `node` strictly earlier than `t`.
    pub fn earlier(&self, node: NodeId, t: f64) -> &[Incidence] {
        let list = &self.adj[node as usize];
        &list[..list.partition_point(|inc| inc.t < t)]
    }
}

/// Normalized causal-sampling probabilities over the candidate next steps.
///
/// Weights are shifted by the latest candidate so the largest term is 1.
pub(crate) fn cawn_step_probabilities(choices: &[Incidence], alpha: f64) -> Vec<f64> {
    let Some(latest) = choices.iter().map(|c| c.t).reduce(f64::max) else {
        return Vec::new();
    };
    let weights: Vec<f64> = choices.iter().map(|c| (-alpha * (latest - c.t)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}
