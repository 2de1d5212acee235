//! Scalar abstraction over the floating-point type used for prices,
//! valuations, and revenues.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar for all monetary quantities: f32 or f64.
///
/// Everything in this crate lives in the unit interval (uniform valuations,
/// posted prices, expected revenues), so any IEEE float works; f64 is the
/// default used by the crate-root aliases and the CLI.
pub trait Scalar:
    Float + FromPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for literals and grid points.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant converts to any scalar")
    }

    /// Conversion from a count (buyer counts, branch sizes, exponents).
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count converts to any scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// One half as a scalar; the geometric path-reward base.
pub(crate) fn half<S: Scalar>() -> S {
    S::from_config(0.5)
}
