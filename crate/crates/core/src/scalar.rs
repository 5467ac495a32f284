//! Scalar abstractions.
//!
//! Everything that touches exponentials or Gaussian draws is generic over
//! [`Real`] (`f32` or `f64`). Walk counting only needs a commutative
//! semiring, so the exact count oracle is generic over [`Count`], which is
//! satisfied by machine integers, `f64`, and big rationals alike.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, Mul};

use num_traits::{Float, FromPrimitive, NumAssign, One, ToPrimitive, Zero};

/// Floating point type used by the sketch engine and the weighted oracle.
pub trait Real:
    'static + Send + Sync + Float + NumAssign + Default + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp
{
    /// Lossy conversion from an `f64` literal or computed coefficient.
    #[inline]
    fn lit(x: f64) -> Self {
        // from_f64 never fails for f32/f64 (out of range values become inf)
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest `x` with `exp(x)` finite in this type.
    fn max_exp_arg() -> f64 {
        Self::max_value().as_f64().ln()
    }

    /// Width tag used by the snapshot header.
    const BITS: u8;
}

impl Real for f32 {
    const BITS: u8 = 32;
}

impl Real for f64 {
    const BITS: u8 = 64;
}

/// Exact (or floating) semiring for counting walks.
pub trait Count: Clone + Debug + PartialEq + Zero + One + Add<Output = Self> + Mul<Output = Self> {}

impl<T> Count for T where T: Clone + Debug + PartialEq + Zero + One + Add<Output = T> + Mul<Output = T> {}

/// Inner product with a fixed left-to-right summation order.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Squared L2 norm.
#[inline]
pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}
