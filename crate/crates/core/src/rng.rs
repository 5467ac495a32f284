//! Counter-based Gaussian features.
//!
//! Entry `(node, column)` of the random feature matrix is a pure function of
//! `(seed, node, column)`: the ChaCha8 stream is selected by the node id and
//! the column picks a fixed word offset inside it. Rows can therefore be
//! materialized in any order, and a grown sketch reproduces the same matrix
//! the oracle builds up front.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::event::NodeId;
use crate::matrix::DenseMatrix;
use crate::scalar::Real;

/// ChaCha words consumed per column (two u64 draws).
const WORDS_PER_COLUMN: u128 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianFeatures {
    seed: u64,
}

#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE; // (0, 1]
    let u2 = (b >> 11) as f64 * SCALE; // [0, 1)
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl GaussianFeatures {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&self, node: NodeId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node);
        rng
    }

    /// Standard normal draw for `(node, column)`.
    pub fn standard_normal(&self, node: NodeId, column: usize) -> f64 {
        let mut rng = self.stream(node);
        rng.set_word_pos(column as u128 * WORDS_PER_COLUMN);
        let a = rng.next_u64();
        box_muller(a, rng.next_u64())
    }

    /// Fills `row` with N(0, 1/len) entries for `node`.
    pub fn fill_row<T: Real>(&self, node: NodeId, row: &mut [T]) {
        let scale = 1.0 / (row.len() as f64).sqrt();
        let mut rng = self.stream(node);
        for x in row.iter_mut() {
            let a = rng.next_u64();
            *x = T::lit(box_muller(a, rng.next_u64()) * scale);
        }
    }

    pub fn row<T: Real>(&self, node: NodeId, dim: usize) -> Vec<T> {
        let mut row = vec![T::zero(); dim];
        self.fill_row(node, &mut row);
        row
    }

    /// The `n x dim` feature matrix `P`.
    pub fn matrix<T: Real>(&self, n: usize, dim: usize) -> DenseMatrix<T> {
        let mut p = DenseMatrix::zeros(n, dim);
        for i in 0..n {
            self.fill_row(i as NodeId, p.row_mut(i));
        }
        p
    }
}
