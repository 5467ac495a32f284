use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Walk weighting rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreScheme {
    /// `s(W) = prod_i exp(-lambda (t - t_i))`.
    TimeDecay { lambda: f64 },
    /// `s(W) = 1`.
    UniformCount,
    /// Causal-sampling probability of the walk with decay `alpha`.
    CawnDecay { alpha: f64 },
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid score scheme parameter: {0}")]
pub struct SchemeError(pub String);

impl ScoreScheme {
    pub fn time_decay(lambda: f64) -> Result<Self, SchemeError> {
        let s = ScoreScheme::TimeDecay { lambda };
        s.validate().map(|_| s)
    }

    pub fn cawn(alpha: f64) -> Result<Self, SchemeError> {
        let s = ScoreScheme::CawnDecay { alpha };
        s.validate().map(|_| s)
    }

    /// Parameters must be finite and non-negative. `lambda = 0` is accepted
    /// and reduces time decay to plain counting.
    pub fn validate(&self) -> Result<(), SchemeError> {
        match *self {
            ScoreScheme::TimeDecay { lambda: p } | ScoreScheme::CawnDecay { alpha: p }
                if !(p.is_finite() && p >= 0.0) =>
            {
                Err(SchemeError(format!("{self} requires a finite non-negative parameter")))
            }
            ScoreScheme::CawnDecay { alpha: 0.0 } => Err(SchemeError("cawn requires alpha > 0".into())),
            _ => Ok(()),
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            ScoreScheme::TimeDecay { .. } => 0,
            ScoreScheme::UniformCount => 1,
            ScoreScheme::CawnDecay { .. } => 2,
        }
    }

    pub(crate) fn parameter(&self) -> f64 {
        match *self {
            ScoreScheme::TimeDecay { lambda } => lambda,
            ScoreScheme::UniformCount => 0.0,
            ScoreScheme::CawnDecay { alpha } => alpha,
        }
    }

    pub(crate) fn from_tag(tag: u8, parameter: f64) -> Option<Self> {
        match tag {
            0 => Some(ScoreScheme::TimeDecay { lambda: parameter }),
            1 => Some(ScoreScheme::UniformCount),
            2 => Some(ScoreScheme::CawnDecay { alpha: parameter }),
            _ => None,
        }
    }

    pub fn is_count(&self) -> bool {
        matches!(self, ScoreScheme::UniformCount)
    }

    pub fn is_cawn(&self) -> bool {
        matches!(self, ScoreScheme::CawnDecay { .. })
    }
}

impl fmt::Display for ScoreScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreScheme::TimeDecay { lambda } => write!(f, "decay(lambda={lambda})"),
            ScoreScheme::UniformCount => write!(f, "count"),
            ScoreScheme::CawnDecay { alpha } => write!(f, "cawn(alpha={alpha})"),
        }
    }
}
