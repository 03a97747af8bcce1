//! Scalar abstractions shared by the evaluation and success-rate arithmetic.
//!
//! Two tiers are used. [`Scalar`] is anything that supports field arithmetic
//! and conversion from counts, which includes exact rationals such as
//! [`num_rational::Rational64`]; ratios, proportions and table deltas are
//! written against it so they can be checked without rounding. [`Real`] adds
//! the floating point operations (square roots, comparisons with NaN
//! semantics) needed by cosine similarity and k-means.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Field-like scalar: exact rationals and floats both qualify.
pub trait Scalar:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy view as `f64`, used for display and tolerance checks.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating point scalar (`f32`, `f64`).
pub trait Real: Scalar + Float + NumAssign + Copy + Default + Display {
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational used where the arithmetic has to reproduce decimal tables.
pub type Exact = num_rational::Rational64;

/// Builds an exact decimal from a scaled integer, e.g. `decimal(728, 1)` is 72.8.
pub fn decimal(mantissa: i64, scale: u32) -> Exact {
    Exact::new(mantissa, 10_i64.pow(scale))
}
