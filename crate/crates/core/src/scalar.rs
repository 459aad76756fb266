//! Scalar abstraction shared by the likelihood, equivalent-state and scheme code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only on types that cannot hold it.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Tolerance used for "this quantity is numerically zero" checks, relative to a unit scale.
    fn tiny() -> Self {
        Self::epsilon() * Self::c(64.0)
    }

    /// Reduces an angle to `[0, 2π)`.
    fn wrap_angle(self) -> Self {
        let tau = Self::TAU();
        let r = self % tau;
        let r = if r < Self::zero() { r + tau } else { r };
        // `r + tau` can round up to exactly tau for tiny negative inputs.
        if r >= tau {
            Self::zero()
        } else {
            r
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
