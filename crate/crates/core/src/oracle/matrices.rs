use crate::event::{InteractionEvent, NodeId};
use crate::matrix::DenseMatrix;
use crate::scalar::{Count, Real};
use crate::scheme::ScoreScheme;

use super::walks::TemporalWalk;
use super::{cawn_step_probabilities, Horizon, Incidence, OracleError, TemporalGraph, CELL_CAP, DEFAULT_WALK_CAP};

/// Exact walk matrices `A^(0) .. A^(k)` at one query horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkMatrixSet<T> {
    scheme: ScoreScheme,
    horizon: Horizon,
    matrices: Vec<DenseMatrix<T>>,
}

impl<T> WalkMatrixSet<T> {
    pub fn scheme(&self) -> ScoreScheme {
        self.scheme
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn n(&self) -> usize {
        self.matrices[0].rows()
    }

    pub fn matrix(&self, hop: usize) -> &DenseMatrix<T> {
        &self.matrices[hop]
    }

    pub fn matrices(&self) -> &[DenseMatrix<T>] {
        &self.matrices
    }

    pub fn entry(&self, hop: usize, u: NodeId, w: NodeId) -> &T {
        self.matrices[hop].get(u as usize, w as usize)
    }
}

impl<T: Clone> WalkMatrixSet<T> {
    /// `[A^(0)_{u,w}, ..., A^(k)_{u,w}]`.
    pub fn profile(&self, u: NodeId, w: NodeId) -> Vec<T> {
        self.matrices.iter().map(|m| m.get(u as usize, w as usize).clone()).collect()
    }
}

impl<T: Real> WalkMatrixSet<T> {
    /// `A^(l) P` for every hop.
    pub fn project(&self, p: &DenseMatrix<T>) -> Vec<DenseMatrix<T>> {
        self.matrices.iter().map(|a| a.matmul(p)).collect()
    }
}

/// Walk enumeration and exact matrices over one event list.
#[derive(Clone, Debug)]
pub struct WalkOracle {
    graph: TemporalGraph,
    walk_cap: u64,
}

impl WalkOracle {
    /// Indexes `events` over nodes `0..n`. Events need not be sorted.
    pub fn new(events: &[InteractionEvent], n: usize) -> Result<Self, OracleError> {
        Ok(Self { graph: TemporalGraph::new(events, n)?, walk_cap: DEFAULT_WALK_CAP })
    }

    pub fn with_walk_cap(mut self, cap: u64) -> Self {
        self.walk_cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub(crate) fn graph(&self) -> &TemporalGraph {
        &self.graph
    }

    fn check_node(&self, node: NodeId) -> Result<(), OracleError> {
        if (node as usize) < self.n() {
            Ok(())
        } else {
            Err(OracleError::NodeOutOfRange { node, n: self.n() })
        }
    }

    /// Every temporal walk of length `0..=max_len` from `u`, by depth-first
    /// search. Each event used as a step yields a distinct walk, so duplicate
    /// events produce duplicate walks.
    pub fn enumerate_walks(
        &self,
        u: NodeId,
        max_len: usize,
        horizon: Horizon,
    ) -> Result<Vec<TemporalWalk>, OracleError> {
        self.check_node(u)?;
        let root = TemporalWalk::rooted(u, horizon.time());
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(walk) = stack.pop() {
            if out.len() as u64 >= self.walk_cap {
                return Err(OracleError::WalkExplosion { cap: self.walk_cap });
            }
            if walk.len() < max_len {
                let (node, t) = *walk.steps.last().expect("walks are never empty");
                let choices =
                    if walk.is_empty() { self.graph.rooted(node, horizon) } else { self.graph.earlier(node, t) };
                // reversed so the stack pops in chronological order
                for inc in choices.iter().rev() {
                    stack.push(walk.extended(inc.other, inc.t));
                }
            }
            out.push(walk);
        }
        Ok(out)
    }

    /// Score of one walk under `scheme`, evaluated at the walk's query time.
    pub fn walk_score(&self, walk: &TemporalWalk, scheme: ScoreScheme, horizon: Horizon) -> f64 {
        let t_query = walk.query_time();
        match scheme {
            ScoreScheme::UniformCount => 1.0,
            ScoreScheme::TimeDecay { lambda } => {
                walk.steps[1..].iter().map(|&(_, ti)| (-lambda * (t_query - ti)).exp()).product()
            }
            ScoreScheme::CawnDecay { alpha } => walk
                .steps
                .windows(2)
                .enumerate()
                .map(|(i, pair)| {
                    let ((from, t_from), (_, t_to)) = (pair[0], pair[1]);
                    let choices =
                        if i == 0 { self.graph.rooted(from, horizon) } else { self.graph.earlier(from, t_from) };
                    // exp(-alpha (t_from - t')) ratios, shifted to the latest candidate
                    let latest = choices.iter().map(|c| c.t).fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = choices.iter().map(|c| (-alpha * (latest - c.t)).exp()).sum();
                    (-alpha * (latest - t_to)).exp() / total
                })
                .product(),
        }
    }

    /// Total number of walks of length `0..=k` over all start nodes.
    pub fn walk_count(&self, k: usize, horizon: Horizon) -> f64 {
        let states = self.graph.states();
        let mut prev = vec![1.0f64; states];
        let mut total = self.n() as f64;
        for hop in 1..=k {
            total += (0..self.n())
                .map(|u| self.graph.rooted(u as NodeId, horizon).iter().map(|inc| prev[inc.state]).sum::<f64>())
                .sum::<f64>();
            if hop < k {
                prev = (0..states)
                    .map(|s| {
                        let (node, t) = self.graph.state(s);
                        self.graph.earlier(node, t).iter().map(|inc| prev[inc.state]).sum()
                    })
                    .collect();
            }
        }
        total
    }

    fn guard(&self, k: usize, horizon: Horizon) -> Result<(), OracleError> {
        let cells =
            self.graph.states() as u128 * self.n() as u128 * k as u128 + (k as u128 + 1) * (self.n() as u128).pow(2);
        if cells > CELL_CAP {
            return Err(OracleError::InstanceTooLarge { cells, limit: CELL_CAP });
        }
        if self.walk_count(k, horizon) > self.walk_cap as f64 {
            Err(OracleError::WalkExplosion { cap: self.walk_cap })
        } else {
            Ok(())
        }
    }

    /// Memoized walk-matrix recursion.
    ///
    /// `cont[j][state]` holds, per end node, the weighted sum of `j`-step
    /// continuations from an arrival state. Step weights are produced per
    /// set of candidate incidences by `weights`.
    fn propagate<C: Count>(
        &self,
        k: usize,
        horizon: Horizon,
        weights: impl Fn(&[Incidence]) -> Vec<C>,
    ) -> Vec<DenseMatrix<C>> {
        let n = self.n();
        let states = self.graph.states();
        let mut cont: Vec<Vec<C>> = Vec::with_capacity(k);
        if k > 0 {
            let mut base = vec![C::zero(); states * n];
            for s in 0..states {
                base[s * n + self.graph.state(s).0 as usize] = C::one();
            }
            cont.push(base);
        }
        for j in 1..k {
            let prev = &cont[j - 1];
            let mut next = vec![C::zero(); states * n];
            for s in 0..states {
                let (node, t) = self.graph.state(s);
                let choices = self.graph.earlier(node, t);
                let ws = weights(choices);
                let out = &mut next[s * n..(s + 1) * n];
                for (inc, w) in choices.iter().zip(ws) {
                    accumulate(out, &w, &prev[inc.state * n..(inc.state + 1) * n]);
                }
            }
            cont.push(next);
        }

        let mut matrices = vec![DenseMatrix::identity(n)];
        for hop in 1..=k {
            let prev = &cont[hop - 1];
            let mut a = DenseMatrix::zeros(n, n);
            for u in 0..n {
                let choices = self.graph.rooted(u as NodeId, horizon);
                let ws = weights(choices);
                let row = a.row_mut(u);
                for (inc, w) in choices.iter().zip(ws) {
                    accumulate(row, &w, &prev[inc.state * n..(inc.state + 1) * n]);
                }
            }
            matrices.push(a);
        }
        matrices
    }

    /// Exact walk counts in any counting semiring (integers, rationals, floats).
    pub fn count_matrices<C: Count>(&self, k: usize, horizon: Horizon) -> Result<WalkMatrixSet<C>, OracleError> {
        self.guard(k, horizon)?;
        let matrices = self.propagate(k, horizon, |choices| vec![C::one(); choices.len()]);
        Ok(WalkMatrixSet { scheme: ScoreScheme::UniformCount, horizon, matrices })
    }

    /// Exact matrices for any score scheme.
    pub fn exact_matrices<T: Real>(
        &self,
        scheme: ScoreScheme,
        k: usize,
        horizon: Horizon,
    ) -> Result<WalkMatrixSet<T>, OracleError> {
        self.guard(k, horizon)?;
        let t_query = horizon.time();
        let matrices = match scheme {
            ScoreScheme::UniformCount => self.propagate(k, horizon, |c| vec![T::one(); c.len()]),
            ScoreScheme::TimeDecay { lambda } => self.propagate(k, horizon, |choices| {
                choices.iter().map(|c| T::lit((-lambda * (t_query - c.t)).exp())).collect()
            }),
            ScoreScheme::CawnDecay { alpha } => self.propagate(k, horizon, |choices| {
                cawn_step_probabilities(choices, alpha).into_iter().map(T::lit).collect()
            }),
        };
        Ok(WalkMatrixSet { scheme, horizon, matrices })
    }

    /// Matrices obtained by summing [`walk_score`](Self::walk_score) over
    /// explicitly enumerated walks. Independent of the memoized recursion.
    pub fn enumerated_matrices(
        &self,
        scheme: ScoreScheme,
        k: usize,
        horizon: Horizon,
    ) -> Result<WalkMatrixSet<f64>, OracleError> {
        let n = self.n();
        let mut matrices: Vec<DenseMatrix<f64>> = (0..=k).map(|_| DenseMatrix::zeros(n, n)).collect();
        for u in 0..n {
            for walk in self.enumerate_walks(u as NodeId, k, horizon)? {
                let m = &mut matrices[walk.len()];
                let entry = *m.get(u, walk.end() as usize) + self.walk_score(&walk, scheme, horizon);
                m.set(u, walk.end() as usize, entry);
            }
        }
        Ok(WalkMatrixSet { scheme, horizon, matrices })
    }
}

#[inline]
fn accumulate<C: Count>(out: &mut [C], w: &C, src: &[C]) {
    for (o, x) in out.iter_mut().zip(src) {
        if *x != C::zero() {
            *o = o.clone() + w.clone() * x.clone();
        }
    }
}

/// Convenience wrapper: exact matrices over nodes `0..n`.
pub fn exact_matrices<T: Real>(
    events: &[InteractionEvent],
    scheme: ScoreScheme,
    k: usize,
    n: usize,
    horizon: Horizon,
) -> Result<WalkMatrixSet<T>, OracleError> {
    WalkOracle::new(events, n)?.exact_matrices(scheme, k, horizon)
}

/// Convenience wrapper: walks from `u` of length at most `max_len`.
pub fn enumerate_walks(
    events: &[InteractionEvent],
    u: NodeId,
    max_len: usize,
    horizon: Horizon,
) -> Result<Vec<TemporalWalk>, OracleError> {
    let n = crate::event::node_count(events).max(u as usize + 1);
    WalkOracle::new(events, n)?.enumerate_walks(u, max_len, horizon)
}
