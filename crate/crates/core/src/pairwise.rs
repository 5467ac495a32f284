//! Pairwise link features from two endpoints' rescaled rows.
//!
//! `F_{u,v}` stacks `[u hops 0..k, v hops 0..k]`; the raw feature is its
//! Gram matrix flattened row-major (`2(k+1) x 2(k+1)`), and the scaled
//! feature is `ln(max(x, 0) + 1)` elementwise.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::event::NodeId;
use crate::matrix::DenseMatrix;
use crate::scalar::{dot, Real};
use crate::sketch::SketchState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseFeature<T> {
    pub u: NodeId,
    pub v: NodeId,
    pub t_now: f64,
    pub raw: Vec<T>,
    pub scaled: Vec<T>,
}

/// Rows `0..=k` are `u`'s rescaled hops, rows `k+1..` are `v`'s.
pub fn stack_features<T: Real>(state: &SketchState<T>, u: NodeId, v: NodeId) -> DenseMatrix<T> {
    let (k, d) = (state.k(), state.dim());
    let mut data = Vec::with_capacity(2 * (k + 1) * d);
    for node in [u, v] {
        for hop in 0..=k {
            data.extend(state.rescaled_row(node, hop).expect("hop within 0..=k").values);
        }
    }
    DenseMatrix::from_vec(2 * (k + 1), d, data)
}

/// Row-major Gram matrix of `rows`, computed on the upper triangle and
/// mirrored, so it is exactly symmetric.
pub fn gram<T: Real>(rows: &DenseMatrix<T>) -> Vec<T> {
    let m = rows.rows();
    let mut out = vec![T::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let x = dot(rows.row(i), rows.row(j));
            out[i * m + j] = x;
            out[j * m + i] = x;
        }
    }
    out
}

pub fn raw_pairwise<T: Real>(state: &SketchState<T>, u: NodeId, v: NodeId) -> Vec<T> {
    gram(&stack_features(state, u, v))
}

pub fn scale_pairwise<T: Real>(raw: &[T]) -> Vec<T> {
    raw.iter().map(|&x| x.max(T::zero()).ln_1p()).collect()
}

pub fn pairwise_feature<T: Real>(state: &SketchState<T>, u: NodeId, v: NodeId) -> PairwiseFeature<T> {
    let raw = raw_pairwise(state, u, v);
    let scaled = scale_pairwise(&raw);
    PairwiseFeature { u, v, t_now: state.t_now(), raw, scaled }
}

/// `raw(v,u)` from `raw(u,v)`: swap the two `(k+1)`-row groups.
pub fn block_swap<T: Copy>(raw: &[T], k: usize) -> Vec<T> {
    let m = 2 * (k + 1);
    assert_eq!(raw.len(), m * m, "raw feature length must be 4(k+1)^2");
    let swap = |i: usize| (i + k + 1) % m;
    let mut out = raw.to_vec();
    for i in 0..m {
        for j in 0..m {
            out[swap(i) * m + swap(j)] = raw[i * m + j];
        }
    }
    out
}

impl<T: Real> PairwiseFeature<T> {
    /// Header for [`write_csv_row`](Self::write_csv_row).
    pub fn write_csv_header<W: Write>(len: usize, mut out: W) -> io::Result<()> {
        write!(out, "u,v,t_now")?;
        for i in 0..len {
            write!(out, ",raw_{i}")?;
        }
        for i in 0..len {
            write!(out, ",scaled_{i}")?;
        }
        writeln!(out)
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "{},{},{}", self.u, self.v, self.t_now)?;
        for x in self.raw.iter().chain(&self.scaled) {
            write!(out, ",{x:e}")?;
        }
        writeln!(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::InteractionEvent;
    use crate::scheme::ScoreScheme;
    use crate::sketch::SketchConfig;

    fn toy(k: usize, dim: usize) -> SketchState<f64> {
        let mut s = SketchState::init(SketchConfig::new(k, dim, ScoreScheme::UniformCount, 4)).unwrap();
        s.replay(&[InteractionEvent::new(0, 1, 1.0).unwrap(), InteractionEvent::new(1, 2, 2.0).unwrap()]).unwrap();
        s
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scale_pairwise(&[0.0, -5.0]), vec![0.0, 0.0]);
        assert!((scale_pairwise(&[std::f64::consts::E - 1.0])[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fresh_state_stack() {
        let s = SketchState::<f64>::init(SketchConfig::new(2, 6, ScoreScheme::UniformCount, 1)).unwrap();
        let f = stack_features(&s, 3, 5);
        assert_eq!(f.row(0), s.features().row::<f64>(3, 6).as_slice());
        assert_eq!(f.row(3), s.features().row::<f64>(5, 6).as_slice());
        for r in [1, 2, 4, 5] {
            assert!(f.row(r).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn toy_hop_two_row() {
        let s = toy(2, 8);
        let f = stack_features(&s, 2, 0);
        assert_eq!(f.row(2), f.row(3));
        let same = stack_features(&s, 1, 1);
        for r in 0..3 {
            assert_eq!(same.row(r), same.row(r + 3));
        }
    }

    #[test]
    fn gram_symmetry_and_estimates() {
        let s = toy(2, 16);
        let raw = raw_pairwise(&s, 2, 0);
        let m = 6;
        for i in 0..m {
            assert!(raw[i * m + i] >= 0.0);
            for j in 0..m {
                assert_eq!(raw[i * m + j], raw[j * m + i]);
            }
        }
        let est = s.estimate_similarity(2, 0);
        for (l, e) in est.iter().enumerate() {
            assert_eq!(raw[l * m + 3], *e);
        }
    }

    #[test]
    fn block_swap_is_bitwise() {
        let s = toy(2, 16);
        for (u, v) in [(2, 0), (1, 2), (0, 7)] {
            assert_eq!(block_swap(&raw_pairwise(&s, u, v), 2), raw_pairwise(&s, v, u));
        }
    }

    #[test]
    fn csv_row_shape() {
        let f = pairwise_feature(&toy(1, 4), 0, 1);
        let mut buf = Vec::new();
        PairwiseFeature::<f64>::write_csv_header(f.raw.len(), &mut buf).unwrap();
        f.write_csv_row(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), 3 + 2 * 16);
        assert_eq!(lines[1].split(',').count(), 3 + 2 * 16);
    }
}
