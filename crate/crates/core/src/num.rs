//! Scalar abstraction shared by the kinematics and bounds code.

use std::fmt::{Debug, Display};

/// Floating point scalar the closed-form model is evaluated in: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::FloatConst
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance used for "exact" structural checks (integer
    /// queue capacity, derived-constant identities) at this precision.
    fn structural_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl Real for f32 {
    fn structural_tol() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn structural_tol() -> Self {
        1e-9
    }
}
