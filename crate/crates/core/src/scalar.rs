use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type used for times, costs and token counts.
///
/// Implemented for `f32` and `f64`. All cost models, schedules and solver
/// outputs are generic over it; the crate root exports `f64` aliases.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless for every count this crate produces (layers, chunks, tokens).
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable as scalar")
    }

    /// Absolute slack used when comparing two times of magnitude `scale`.
    fn slack(scale: Self) -> Self {
        Self::lit(1024.0) * Self::epsilon() * scale.abs().max(Self::one())
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// `max` that never hides a NaN operand.
pub(crate) fn fmax<T: Scalar>(a: T, b: T) -> T {
    if a.is_nan() || b.is_nan() {
        T::nan()
    } else if a >= b {
        a
    } else {
        b
    }
}
