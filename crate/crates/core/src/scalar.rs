//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is generic over [`Real`], a floating-point
//! scalar built on `num-traits`. The two interesting instantiations are
//! `f64` (the default used by the pipeline crates) and `f32` (exercised in
//! tests to keep the kernels genuinely generic). Concrete aliases live at
//! the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by every kernel in this crate.
///
/// The bounds are the union of what the kernels actually need: IEEE
/// arithmetic with exp/ln/sqrt ([`Float`]), lossless-enough conversion from
/// literals ([`FromPrimitive`]/[`ToPrimitive`]), accumulation operators, and
/// thread-safety so solvers can share read-only data across workers.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable at all (never the case for
    /// the finite constants used internally; infinities map to infinities).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Converts this scalar to `f64` (widening for f32, identity for f64).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// Converts a `usize` index/count into this scalar type.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Display
        + Debug
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hypot_generic<T: Real>(a: T, b: T) -> T {
        (a * a + b * b).sqrt()
    }

    #[test]
    fn instantiates_at_both_widths() {
        assert_eq!(hypot_generic(3.0_f64, 4.0_f64), 5.0);
        assert_eq!(hypot_generic(3.0_f32, 4.0_f32), 5.0);
        assert_eq!(f64::of(0.5), 0.5);
        assert_eq!(f32::of_usize(7), 7.0);
    }
}
