//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar usable by every kernel: `f32` or `f64`.
///
/// Beyond `num_traits::Float` this carries the complementary error
/// function, which the normal margins need and `Float` does not provide.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    fn erfc(self) -> Self;

    /// Lossless-enough conversion of an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Smallest value used to keep probabilities away from 0 and 1.
    #[inline]
    fn prob_floor() -> Self {
        Self::lit(1e-12).max(Self::epsilon())
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

/// Clamp a probability into `[floor, 1 - floor]`.
#[inline]
pub fn clamp_prob<T: Real>(p: T) -> T {
    let eps = T::prob_floor();
    p.max(eps).min(T::one() - eps)
}
