use serde::{Deserialize, Serialize};

use crate::event::NodeId;

/// `[(w_0, t_0), ..., (w_j, t_j)]` with strictly decreasing times, where
/// `t_0` is the query time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalWalk {
    pub steps: Vec<(NodeId, f64)>,
}

impl TemporalWalk {
    pub fn rooted(node: NodeId, t: f64) -> Self {
        Self { steps: vec![(node, t)] }
    }

    /// Number of hops.
    pub fn len(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> NodeId {
        self.steps[0].0
    }

    pub fn end(&self) -> NodeId {
        self.steps[self.steps.len() - 1].0
    }

    pub fn query_time(&self) -> f64 {
        self.steps[0].1
    }

    pub(crate) fn extended(&self, node: NodeId, t: f64) -> Self {
        let mut steps = Vec::with_capacity(self.steps.len() + 1);
        steps.extend_from_slice(&self.steps);
        steps.push((node, t));
        Self { steps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accessors() {
        let w = TemporalWalk::rooted(2, 3.0).extended(1, 2.0).extended(0, 1.0);
        assert_eq!(w.len(), 2);
        assert_eq!((w.start(), w.end(), w.query_time()), (2, 0, 3.0));
        assert!(TemporalWalk::rooted(5, 0.0).is_empty());
    }
}
