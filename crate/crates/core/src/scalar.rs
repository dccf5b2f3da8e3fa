//! Scalar abstraction shared by the fitting code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the fitters are generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Residual sum of squares below which a least-squares fit is treated as exact.
///
/// Scales with the number of observations and the magnitude of the response so
/// that round-off on noise-free input is not mistaken for signal.
pub fn zero_sse_tolerance<T: Real>(n: usize, y: &[T]) -> T {
    let ymax = y
        .iter()
        .fold(T::one(), |acc, v| if v.abs() > acc { v.abs() } else { acc });
    let unit = T::lit(256.0) * T::epsilon() * ymax;
    T::from_usize_lossy(n.max(1)) * unit * unit
}
