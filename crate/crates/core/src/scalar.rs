//! Floating-point abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the kernels are generic over: `f32` or `f64`.
///
/// Convergence thresholds depend on the working precision, so each
/// implementation supplies its own.
pub trait Scalar:
    Float
    + FloatConst
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
    /// |Δ(s)| below which Newton refinement stops.
    fn root_tolerance() -> Self;

    /// |Δ(s)| every pole in a [`crate::PoleSet`] must satisfy.
    fn pole_tolerance() -> Self;

    /// Distance below which two refined roots are the same root, and
    /// |Im s| below which a root is snapped onto the real axis.
    fn merge_distance() -> Self;

    /// Literal conversion. Panics only if `x` is not representable, which
    /// never happens for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn root_tolerance() -> f64 {
        1e-12
    }
    fn pole_tolerance() -> f64 {
        1e-10
    }
    fn merge_distance() -> f64 {
        1e-6
    }
}

impl Scalar for f32 {
    fn root_tolerance() -> f32 {
        1e-5
    }
    fn pole_tolerance() -> f32 {
        1e-4
    }
    fn merge_distance() -> f32 {
        1e-3
    }
}
