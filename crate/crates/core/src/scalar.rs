//! Scalar abstraction shared by the model, controller, trace and link code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the simulator math is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal into this scalar.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Megabytes to megabits.
pub fn megabits<S: Scalar>(megabytes: S) -> S {
    megabytes * S::lit(8.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip_for_both_widths() {
        assert_eq!(<f64 as Scalar>::lit(2.92), 2.92);
        assert_eq!(<f32 as Scalar>::lit(2.92), 2.92f32);
        assert_eq!(megabits(1.0f32), 8.0);
    }
}
