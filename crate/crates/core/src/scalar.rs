//! Floating point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the linear algebra is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Tolerance for internal consistency checks such as the block
    /// symmetry of the lifted transition matrix.
    fn consistency_tol() -> Self;

    /// Magnitude below which a weight is treated as a structural zero.
    fn weight_tol() -> Self;

    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn consistency_tol() -> Self {
        1e-10
    }

    fn weight_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn consistency_tol() -> Self {
        1e-4
    }

    fn weight_tol() -> Self {
        1e-12
    }
}
