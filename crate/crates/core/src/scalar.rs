//! Numeric trait shared by the geometry, entropy and statistics code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the scoring math is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// Tolerance used when checking that a vector is unit-norm.
    fn unit_norm_tol() -> Self;

    /// Relative singular-value cutoff for rank-deficient least-squares solves.
    fn singular_cutoff(rows: usize, cols: usize) -> Self {
        let scale = Self::from_usize_lossy(rows.max(cols).max(1));
        (Self::epsilon() * scale).max(Self::lit(1e-12))
    }
}

impl Scalar for f32 {
    fn unit_norm_tol() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn unit_norm_tol() -> Self {
        1e-9
    }
}

/// Plain ascending-index summation.
pub(crate) fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
