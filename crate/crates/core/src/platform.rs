//! Machine description and roofline arithmetic.
//!
//! A [`PlatformSpec`] is loaded from a flat TOML document whose keys are
//! exactly the struct's field names. Fields with a documented default may be
//! omitted; everything else is required.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::AtomicDims;
use crate::scalar::Scalar;

/// Reference profile for a 400-core (8x50) array with one DDR4 channel.
pub const VCK190_DOCUMENT: &str = include_str!("../profiles/vck190.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataType {
    #[serde(alias = "fp32")]
    FP32,
    #[serde(alias = "int16")]
    INT16,
    #[serde(alias = "int8")]
    INT8,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::FP32, DataType::INT16, DataType::INT8];
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::FP32 => "FP32",
            DataType::INT16 => "INT16",
            DataType::INT8 => "INT8",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for DataType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FP32" => Ok(DataType::FP32),
            "INT16" => Ok(DataType::INT16),
            "INT8" => Ok(DataType::INT8),
            _ => Err(Error::Invalid(format!("unknown data type `{s}`"))),
        }
    }
}

/// Per-type element width and per-core MAC issue rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataTypeSpec {
    pub name: DataType,
    pub bytes_per_element: u64,
    pub macs_per_cycle_per_core: u64,
    /// Overrides the derived atomic block for this type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic: Option<AtomicDims>,
}

fn default_local_mem() -> u64 {
    32 * 1024
}
fn default_neighbor_mem() -> u64 {
    128 * 1024
}
fn default_interface_tiles() -> u64 {
    39
}
fn default_in_channels() -> u64 {
    8
}
fn default_out_channels() -> u64 {
    6
}
fn default_channel_bytes() -> u64 {
    4
}
fn default_packet_factor() -> u64 {
    4
}
fn default_ew_ports() -> u64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct PlatformSpec<T> {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    pub core_clock_hz: T,
    #[serde(default = "default_local_mem")]
    pub local_mem_bytes: u64,
    #[serde(default = "default_neighbor_mem")]
    pub neighbor_mem_bytes: u64,
    #[serde(default = "default_interface_tiles")]
    pub num_interface_tiles: u64,
    #[serde(default = "default_in_channels")]
    pub in_channels_per_tile: u64,
    #[serde(default = "default_out_channels")]
    pub out_channels_per_tile: u64,
    #[serde(default = "default_channel_bytes")]
    pub channel_bytes_per_core_cycle: u64,
    pub pl_clock_hz: T,
    /// Width of one interface channel on the logic side. When present the
    /// channel rate is capped at `pl_clock_hz * pl_channel_bytes_per_pl_cycle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pl_channel_bytes_per_pl_cycle: Option<u64>,
    pub pl_buffer_bytes: u64,
    pub offchip_bw_bytes_per_s: T,
    #[serde(default = "default_packet_factor")]
    pub max_packet_factor: u64,
    #[serde(default = "default_ew_ports")]
    pub switch_ew_ports: u64,
    pub dtypes: Vec<DataTypeSpec>,
}

/// Parses and validates a machine-description document.
pub fn load_platform<T: Scalar>(text: &str) -> Result<PlatformSpec<T>> {
    let spec: PlatformSpec<T> =
        toml::from_str(text).map_err(|e| Error::PlatformParse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

impl<T: Scalar> PlatformSpec<T> {
    pub fn vck190() -> Self {
        load_platform(VCK190_DOCUMENT).expect("bundled profile is valid")
    }

    /// Canonical document form; `load_platform(&spec.to_document())` is `spec`.
    pub fn to_document(&self) -> String {
        toml::to_string(self).expect("platform spec serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("rows", self.rows),
            ("cols", self.cols),
            ("local_mem_bytes", self.local_mem_bytes),
            ("neighbor_mem_bytes", self.neighbor_mem_bytes),
            ("num_interface_tiles", self.num_interface_tiles),
            ("in_channels_per_tile", self.in_channels_per_tile),
            ("out_channels_per_tile", self.out_channels_per_tile),
            (
                "channel_bytes_per_core_cycle",
                self.channel_bytes_per_core_cycle,
            ),
            ("pl_buffer_bytes", self.pl_buffer_bytes),
            ("max_packet_factor", self.max_packet_factor),
            ("switch_ew_ports", self.switch_ew_ports),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::NonPositive {
                    field: field.into(),
                });
            }
        }
        if self.pl_channel_bytes_per_pl_cycle == Some(0) {
            return Err(Error::NonPositive {
                field: "pl_channel_bytes_per_pl_cycle".into(),
            });
        }
        let rates = [
            ("core_clock_hz", self.core_clock_hz),
            ("pl_clock_hz", self.pl_clock_hz),
            ("offchip_bw_bytes_per_s", self.offchip_bw_bytes_per_s),
        ];
        for (field, v) in rates {
            if v.is_nan() || v <= T::zero() {
                return Err(Error::NonPositive {
                    field: field.into(),
                });
            }
        }
        if self.dtypes.is_empty() {
            return Err(Error::Invalid(
                "dtypes must list at least one data type".into(),
            ));
        }
        for (i, dt) in self.dtypes.iter().enumerate() {
            if dt.bytes_per_element == 0 {
                return Err(Error::NonPositive {
                    field: format!("dtypes[{i}].bytes_per_element"),
                });
            }
            if dt.macs_per_cycle_per_core == 0 {
                return Err(Error::NonPositive {
                    field: format!("dtypes[{i}].macs_per_cycle_per_core"),
                });
            }
            if self.dtypes[..i].iter().any(|d| d.name == dt.name) {
                return Err(Error::Invalid(format!(
                    "data type {} listed twice",
                    dt.name
                )));
            }
            if let Some(a) = dt.atomic {
                a.check_against(dt)?;
            }
        }
        Ok(())
    }

    pub fn cores(&self) -> u64 {
        self.rows * self.cols
    }

    pub fn total_in_channels(&self) -> u64 {
        self.num_interface_tiles * self.in_channels_per_tile
    }

    pub fn total_out_channels(&self) -> u64 {
        self.num_interface_tiles * self.out_channels_per_tile
    }

    pub fn dtype(&self, name: DataType) -> Result<&DataTypeSpec> {
        self.dtypes
            .iter()
            .find(|d| d.name == name)
            .ok_or(Error::MissingDtype(name))
    }

    /// Bytes one interface channel moves per core cycle, after the optional
    /// logic-side cap.
    pub fn channel_rate_per_core_cycle(&self) -> T {
        let core_side = T::from_count(self.channel_bytes_per_core_cycle);
        match self.pl_channel_bytes_per_pl_cycle {
            Some(w) => {
                let pl_side = T::from_count(w) * self.pl_clock_hz / self.core_clock_hz;
                core_side.min(pl_side)
            }
            None => core_side,
        }
    }
}

/// `cores_used * clock * macs_per_cycle * 2` operations per second.
pub fn peak_throughput<T: Scalar>(
    spec: &PlatformSpec<T>,
    dtype: &DataTypeSpec,
    cores_used: u64,
) -> Result<T> {
    if cores_used > spec.cores() {
        return Err(Error::CoresExceeded {
            requested: cores_used,
            available: spec.cores(),
        });
    }
    Ok(T::from_count(cores_used)
        * spec.core_clock_hz
        * T::from_count(dtype.macs_per_cycle_per_core)
        * T::from_count(2))
}

/// Operations per off-chip byte needed to sustain `peak`.
pub fn required_ctc<T: Scalar>(peak: T, bw: T) -> Result<T> {
    if bw.is_nan() || bw <= T::zero() {
        return Err(Error::ZeroBandwidth);
    }
    Ok(peak / bw)
}
