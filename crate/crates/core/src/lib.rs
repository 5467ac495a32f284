//! Streaming random-projection sketches of temporal walk matrices.
//!
//! [`SketchState`] maintains `(k+1)` propagated feature matrices under a
//! stream of timestamped interactions; [`oracle`] computes the exact walk
//! matrices they approximate; [`pairwise`] turns sketch rows into link
//! features; [`eval`] drives replay, accuracy and throughput experiments.

pub mod eval;
pub mod event;
pub mod matrix;
pub mod oracle;
pub mod pairwise;
pub mod rng;
pub mod scalar;
pub mod scheme;
pub mod sketch;

pub use event::{EventBatch, InteractionEvent, NodeId, StreamError, StreamHeader};
pub use matrix::DenseMatrix;
pub use oracle::{Horizon, OracleError, WalkMatrixSet, WalkOracle};
pub use pairwise::PairwiseFeature;
pub use rng::GaussianFeatures;
pub use scalar::Real;
pub use scheme::ScoreScheme;
pub use sketch::{RescaledRow, SketchConfig, SketchError, SketchState};

/// Double-precision sketch, the default.
pub type Sketch = SketchState<f64>;
/// Single-precision sketch (half the memory).
pub type Sketch32 = SketchState<f32>;
/// Double-precision walk matrices.
pub type WalkMatrices = WalkMatrixSet<f64>;
pub type Pairwise = PairwiseFeature<f64>;
