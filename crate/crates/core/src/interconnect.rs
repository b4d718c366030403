//! Interface-channel allocation and a horizontal routing-congestion estimate.
//!
//! Input operands reach the array through a mix of broadcast (one stream
//! duplicated across several columns) and packet switching (one stream
//! time-multiplexed across several cores). Columns are laid out
//! `m.2`-major: logical column `m2 * C + n2`, and `k.2` indexes the row
//! inside a column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{
    check_broadcast, single_core_compute_cycles, single_core_transfer_cycles, MappingConfig,
};
use crate::platform::PlatformSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortPlan {
    pub packet_factor: u64,
    pub lhs_in_ports: u64,
    pub rhs_in_ports: u64,
    pub out_ports: u64,
    pub total_in: u64,
    pub total_out: u64,
    pub feasible: bool,
}

/// Destinations one port can serve in turn: `min(floor(ctc), max_packet_factor, B)`, at least 1.
pub fn packet_factor<T: Scalar>(cfg: &MappingConfig, spec: &PlatformSpec<T>) -> Result<u64> {
    let dt = spec.dtype(cfg.shape.dtype)?;
    let compute = single_core_compute_cycles(&cfg.tile, dt);
    let transfer = single_core_transfer_cycles(&cfg.tile, dt, spec);
    let floor_ctc = compute / transfer.max(1);
    Ok(floor_ctc
        .min(spec.max_packet_factor)
        .min(cfg.array.b)
        .max(1))
}

pub fn port_plan<T: Scalar>(cfg: &MappingConfig, spec: &PlatformSpec<T>) -> Result<PortPlan> {
    check_broadcast(cfg)?;
    let p = packet_factor(cfg, spec)?;
    Ok(port_plan_with(cfg, p, spec))
}

pub(crate) fn port_plan_with<T: Scalar>(
    cfg: &MappingConfig,
    p: u64,
    spec: &PlatformSpec<T>,
) -> PortPlan {
    let (a, b, c) = (cfg.array.a, cfg.array.b, cfg.array.c);
    let lhs = (a * b).div_ceil(p) * (c / cfg.bf_lhs);
    let rhs = (c * b).div_ceil(p) * (a / cfg.bf_rhs);
    let out = (a * c).div_ceil(p);
    let total_in = lhs + rhs;
    PortPlan {
        packet_factor: p,
        lhs_in_ports: lhs,
        rhs_in_ports: rhs,
        out_ports: out,
        total_in,
        total_out: out,
        feasible: total_in <= spec.total_in_channels() && out <= spec.total_out_channels(),
    }
}

/// One port per destination core, no broadcast and no packet switching.
pub fn naive_lhs_ports(cfg: &MappingConfig) -> u64 {
    cfg.array.cores()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operand {
    Lhs,
    Rhs,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreCoord {
    pub column: u64,
    pub row: u64,
}

/// One physical stream and the cores it reaches.
///
/// `packet_group` indexes the packet-switched destination set and
/// `broadcast_group` the set of columns the stream is duplicated to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stream {
    pub operand: Operand,
    pub packet_group: u64,
    pub broadcast_group: u64,
    pub destinations: Vec<CoreCoord>,
}

impl Stream {
    /// Sorted, de-duplicated logical columns this stream touches.
    pub fn columns(&self) -> Vec<u64> {
        let mut cols: Vec<u64> = self.destinations.iter().map(|d| d.column).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// Every stream of the plan: LHS ports, then RHS ports, then outputs.
pub fn streams(cfg: &MappingConfig, packet_factor: u64) -> Vec<Stream> {
    let (a, b, c) = (cfg.array.a, cfg.array.b, cfg.array.c);
    let p = packet_factor.max(1) as usize;
    let mut out = Vec::new();

    // LHS tile (m2, k2) is shared by every n2
    let lhs_dest: Vec<(u64, u64)> = (0..a)
        .flat_map(|m2| (0..b).map(move |k2| (m2, k2)))
        .collect();
    for (q, chunk) in lhs_dest.chunks(p).enumerate() {
        for g in 0..c / cfg.bf_lhs {
            let destinations = chunk
                .iter()
                .flat_map(|&(m2, k2)| {
                    (g * cfg.bf_lhs..(g + 1) * cfg.bf_lhs).map(move |n2| CoreCoord {
                        column: m2 * c + n2,
                        row: k2,
                    })
                })
                .collect();
            out.push(Stream {
                operand: Operand::Lhs,
                packet_group: q as u64,
                broadcast_group: g,
                destinations,
            });
        }
    }

    // RHS tile (k2, n2) is shared by every m2
    let rhs_dest: Vec<(u64, u64)> = (0..c)
        .flat_map(|n2| (0..b).map(move |k2| (n2, k2)))
        .collect();
    for (q, chunk) in rhs_dest.chunks(p).enumerate() {
        for h in 0..a / cfg.bf_rhs {
            let destinations = chunk
                .iter()
                .flat_map(|&(n2, k2)| {
                    (h * cfg.bf_rhs..(h + 1) * cfg.bf_rhs).map(move |m2| CoreCoord {
                        column: m2 * c + n2,
                        row: k2,
                    })
                })
                .collect();
            out.push(Stream {
                operand: Operand::Rhs,
                packet_group: q as u64,
                broadcast_group: h,
                destinations,
            });
        }
    }

    let columns: Vec<u64> = (0..a * c).collect();
    for (q, chunk) in columns.chunks(p).enumerate() {
        out.push(Stream {
            operand: Operand::Out,
            packet_group: q as u64,
            broadcast_group: 0,
            destinations: chunk
                .iter()
                .map(|&column| CoreCoord { column, row: b - 1 })
                .collect(),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub horizontal_segments: u64,
    pub max_segments_per_boundary: u64,
    /// Trunks crossing the boundary between column `i` and `i + 1`.
    pub boundary_load: Vec<u64>,
    pub feasible: bool,
}

/// A horizontal trunk: enters at `entry` and reaches every served column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trunk {
    pub entry: u64,
    pub served: Vec<u64>,
}

pub fn trunk_congestion(trunks: &[Trunk], columns: u64, ew_ports: u64) -> Result<CongestionReport> {
    let mut load = vec![0u64; columns.saturating_sub(1) as usize];
    let mut segments = 0;
    for t in trunks {
        for &col in std::iter::once(&t.entry).chain(t.served.iter()) {
            if col >= columns {
                return Err(Error::EntryColumn {
                    column: col,
                    columns,
                });
            }
        }
        let lo = t
            .served
            .iter()
            .copied()
            .chain([t.entry])
            .min()
            .unwrap_or(t.entry);
        let hi = t
            .served
            .iter()
            .copied()
            .chain([t.entry])
            .max()
            .unwrap_or(t.entry);
        segments += hi - lo;
        for slot in &mut load[lo as usize..hi as usize] {
            *slot += 1;
        }
    }
    let max = load.iter().copied().max().unwrap_or(0);
    Ok(CongestionReport {
        horizontal_segments: segments,
        max_segments_per_boundary: max,
        boundary_load: load,
        feasible: max <= ew_ports,
    })
}

/// Congestion of the input streams. `entry_columns` gives one interface
/// column per input stream (LHS first, then RHS); by default each stream
/// enters under the leftmost column it serves.
pub fn congestion<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
    entry_columns: Option<&[u64]>,
) -> Result<CongestionReport> {
    check_broadcast(cfg)?;
    let p = packet_factor(cfg, spec)?;
    let inputs: Vec<Stream> = streams(cfg, p)
        .into_iter()
        .filter(|s| s.operand != Operand::Out)
        .collect();
    if let Some(e) = entry_columns {
        if e.len() != inputs.len() {
            return Err(Error::Invalid(format!(
                "{} entry columns given for {} input streams",
                e.len(),
                inputs.len()
            )));
        }
    }
    let trunks: Vec<Trunk> = inputs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            // only the outermost columns matter for the trunk's extent
            let lo = s.destinations.iter().map(|d| d.column).min().unwrap_or(0);
            let hi = s.destinations.iter().map(|d| d.column).max().unwrap_or(0);
            let entry = match entry_columns {
                Some(e) => e[i],
                None => lo,
            };
            Trunk {
                entry,
                served: vec![lo, hi],
            }
        })
        .collect();
    trunk_congestion(&trunks, cfg.array.columns(), spec.switch_ew_ports)
}
