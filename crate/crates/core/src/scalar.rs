//! Scalar type used for rates, times and ratios.
//!
//! Cycle and byte counts are integers throughout; everything measured in
//! seconds, hertz or operations per byte is generic over [`Scalar`].

use std::fmt::{Debug, Display};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("u64 is representable in every float type")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every float type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
