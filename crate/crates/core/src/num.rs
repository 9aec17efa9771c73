//! Scalar abstraction for the network kernels.
//!
//! Geometry always runs in `f64`. The network runs in `f32` for training and
//! inference but must also run in `f64` so that finite-difference gradient
//! checks are meaningful, hence one small trait instead of hardcoded floats.

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point scalar the tensor and network code is generic over.
///
/// Only `f32` and `f64` implement it. The conversions are explicit methods
/// rather than `NumCast` calls so the narrowing in the `f32` case is visible
/// at the call site.
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Real for f32 {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn into_f64(self) -> f64 {
        self
    }
}
