//! Seeded random interaction streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::event::{InteractionEvent, NodeId};

/// Average degree of the scalability workloads.
pub const BENCH_DEGREE: usize = 100;

/// Node count of a scalability workload with `edges` interactions.
pub fn bench_nodes(edges: usize) -> usize {
    (2 * edges / BENCH_DEGREE).max(2)
}

fn random_pair<R: Rng>(rng: &mut R, n: usize) -> (NodeId, NodeId) {
    let u = rng.gen_range(0..n as NodeId);
    let mut v = rng.gen_range(0..n as NodeId - 1);
    if v >= u {
        v += 1;
    }
    (u, v)
}

/// Uniform random endpoints (no self-loops) over `edges / 50` nodes, i.e.
/// average degree 100, with timestamps equal to the event index.
pub fn synthetic_stream(edges: usize, seed: u64) -> Vec<InteractionEvent> {
    let n = bench_nodes(edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..edges)
        .map(|i| {
            let (u, v) = random_pair(&mut rng, n);
            InteractionEvent { u, v, t: i as f64 }
        })
        .collect()
}

/// How timestamps of a desk-scale instance are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StampPolicy {
    /// Every event gets its own timestamp.
    Distinct,
    /// Each timestamp is shared by 2..=4 events with probability `share`.
    Batched { share: f64 },
}

/// A small random stream over nodes `0..n` with random positive time gaps.
pub fn random_instance(n: usize, events: usize, seed: u64, stamps: StampPolicy) -> Vec<InteractionEvent> {
    assert!(n >= 2, "need at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(events);
    let mut t = 0.0;
    while out.len() < events {
        t += rng.gen_range(0.5..2.0);
        let size = match stamps {
            StampPolicy::Distinct => 1,
            StampPolicy::Batched { share } => {
                if rng.gen_bool(share) {
                    rng.gen_range(2..=4)
                } else {
                    1
                }
            }
        };
        for _ in 0..size.min(events - out.len()) {
            let (u, v) = random_pair(&mut rng, n);
            out.push(InteractionEvent { u, v, t });
        }
    }
    out
}
