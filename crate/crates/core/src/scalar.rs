//! Scalar abstraction so the distribution algebra and solvers run over `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the library computes in.
///
/// The associated tolerances are per-precision: the `f64` values are the ones the
/// documented guarantees (exact capacity to 1e-12 and so on) are stated for.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Masses below this are dropped from a distribution on construction.
    const MASS_FLOOR: f64;
    /// How far the supplied weights of a "normalized" distribution may sum away from 1.
    const SUM_TOL: f64;
    /// Default residual tolerance on the capacity constraint in the solvers.
    const CAPACITY_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Scalar for f64 {
    const MASS_FLOOR: f64 = 1e-15;
    const SUM_TOL: f64 = 1e-9;
    const CAPACITY_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const MASS_FLOOR: f64 = 1e-9;
    const SUM_TOL: f64 = 1e-5;
    const CAPACITY_TOL: f64 = 1e-5;
}
