//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (systems, integrators, certification) is generic
//! over [`Real`]; `f64` is the default used by the CLI and the bundled
//! scenarios, `f32` works for quick low-precision experiments.

use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal (tolerances, catalog
    /// coefficients). Panics only for values outside the type's range, which
    /// cannot happen for the constants used in this crate.
    fn from_f64_lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable in scalar type")
    }

    /// Conversion towards `f64` for diagnostics and report formatting.
    fn as_f64(self) -> f64 {
        num_traits::NumCast::from(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
