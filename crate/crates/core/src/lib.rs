//! Mapping, port planning, transfer scheduling and design-space exploration
//! for matrix multiplication on a 2D array of vector cores fed through a
//! limited set of interface channels.
//!
//! Rates, times and ratios are generic over [`Scalar`] (`f32` or `f64`);
//! cycle, byte and dimension counts are `u64`. The aliases below fix the
//! scalar to `f64`, with `F32` variants for single precision.

pub mod cli;
pub mod dse;
pub mod error;
pub mod interconnect;
pub mod mapping;
pub mod pipesim;
pub mod platform;
pub mod scalar;
pub mod schedule;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Platform = platform::PlatformSpec<f64>;
pub type Metrics = mapping::DerivedMetrics<f64>;
pub type Timing = pipesim::DesignTiming<f64>;
pub type Dse = dse::DseResult<f64>;

pub type PlatformF32 = platform::PlatformSpec<f32>;
pub type MetricsF32 = mapping::DerivedMetrics<f32>;
pub type TimingF32 = pipesim::DesignTiming<f32>;
pub type DseF32 = dse::DseResult<f32>;
