//! Causal temporal walk sampling, the Monte-Carlo counterpart of the
//! CAWN walk matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::NodeId;
use crate::matrix::DenseMatrix;

use super::walks::TemporalWalk;
use super::{cawn_step_probabilities, Horizon, OracleError, WalkOracle};

/// Samples one walk of at most `k` hops from `u`. Each step picks an
/// earlier interaction of the current node with probability proportional
/// to `exp(-alpha * (t_current - t'))`; the walk stops early at a node with
/// no earlier interaction.
pub fn sample_cawn_walk<R: Rng + ?Sized>(
    oracle: &WalkOracle,
    alpha: f64,
    k: usize,
    u: NodeId,
    horizon: Horizon,
    rng: &mut R,
) -> TemporalWalk {
    let graph = oracle.graph();
    let mut walk = TemporalWalk::rooted(u, horizon.time());
    let (mut node, mut t) = (u, horizon.time());
    for hop in 0..k {
        let choices = if hop == 0 { graph.rooted(node, horizon) } else { graph.earlier(node, t) };
        if choices.is_empty() {
            break;
        }
        let probs = cawn_step_probabilities(choices, alpha);
        let mut draw: f64 = rng.gen();
        let mut pick = choices.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if draw < *p {
                pick = i;
                break;
            }
            draw -= p;
        }
        node = choices[pick].other;
        t = choices[pick].t;
        walk.steps.push((node, t));
    }
    walk
}

/// Fraction of `samples` sampled walks whose `i`-th node is `w`, as a
/// `(k+1) x n` matrix.
pub fn visit_frequencies(
    oracle: &WalkOracle,
    alpha: f64,
    k: usize,
    u: NodeId,
    horizon: Horizon,
    samples: usize,
    seed: u64,
) -> Result<DenseMatrix<f64>, OracleError> {
    if u as usize >= oracle.n() {
        return Err(OracleError::NodeOutOfRange { node: u, n: oracle.n() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = DenseMatrix::<u64>::from_vec(k + 1, oracle.n(), vec![0; (k + 1) * oracle.n()]);
    for _ in 0..samples {
        let walk = sample_cawn_walk(oracle, alpha, k, u, horizon, &mut rng);
        for (hop, &(node, _)) in walk.steps.iter().enumerate() {
            let c = *counts.get(hop, node as usize);
            counts.set(hop, node as usize, c + 1);
        }
    }
    Ok(counts.map(|&c| c as f64 / samples as f64))
}
