//! Design-level timing: how long a whole multiply takes on one mapping.
//!
//! Each off-chip phase loads one block while the previous one computes
//! (double buffering), so the run costs the larger of the summed on-chip
//! and off-chip terms plus one phase of the smaller term that cannot be
//! overlapped. The on-chip term is the larger of compute and of the
//! interface channels feeding the cores.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interconnect::{port_plan, PortPlan};
use crate::mapping::{
    onchip_ctc, single_core_compute_cycles, single_core_transfer_cycles, MappingConfig,
    OffchipTraffic,
};
use crate::platform::{peak_throughput, DataTypeSpec, PlatformSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Compute,
    Offchip,
    Plio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DesignTiming<T> {
    pub phases: u64,
    pub phase_compute_s: T,
    /// Time the interface channels need to feed one phase of batches.
    pub phase_plio_s: T,
    pub phase_mem_s: T,
    pub total_compute_s: T,
    pub total_mem_s: T,
    pub total_s: T,
    pub predicted_ops_per_s: T,
    pub bound: Bound,
    /// Steps per computation used when simulating one column.
    pub ctc_steps: u64,
    /// Fraction of each batch period the cores spend computing (1 unless
    /// the channels cannot keep up).
    pub feed_efficiency: T,
}

pub fn design_timing<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
) -> Result<DesignTiming<T>> {
    cfg.validate(spec)?;
    let dt = spec.dtype(cfg.shape.dtype)?;
    let ports = port_plan(cfg, spec)?;
    Ok(timing_with(cfg, spec, dt, &ports))
}

/// `design_timing` for an already validated config whose port plan is known.
pub(crate) fn timing_with<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
    dt: &DataTypeSpec,
    ports: &PortPlan,
) -> DesignTiming<T> {
    let compute_cycles = single_core_compute_cycles(&cfg.tile, dt);
    let operand_bytes = cfg.tile.operand_elems() * dt.bytes_per_element;
    let transfer_cycles = T::from_count(operand_bytes) / spec.channel_rate_per_core_cycle();
    let feed_cycles = T::from_count(ports.packet_factor) * transfer_cycles;

    let batches = T::from_count(cfg.batch.count());
    let clock = spec.core_clock_hz;
    let phase_compute_s = batches * T::from_count(compute_cycles) / clock;
    let phase_plio_s = batches * feed_cycles / clock;
    let traffic = OffchipTraffic::of(cfg, dt);
    let phase_mem_s = traffic.bytes_per_phase::<T>() / spec.offchip_bw_bytes_per_s;

    let phases = traffic.outer.phases();
    let p = T::from_count(phases);
    let onchip = phase_compute_s.max(phase_plio_s);
    let total_onchip = p * onchip;
    let total_mem_s = p * phase_mem_s;
    let total_s = total_onchip.max(total_mem_s) + onchip.min(phase_mem_s);

    let bound = if !ports.feasible {
        Bound::Plio
    } else if total_mem_s > total_onchip {
        Bound::Offchip
    } else if phase_plio_s > phase_compute_s {
        Bound::Plio
    } else {
        Bound::Compute
    };

    let ctc_steps = (compute_cycles / single_core_transfer_cycles(&cfg.tile, dt, spec)).max(1);

    DesignTiming {
        phases,
        phase_compute_s,
        phase_plio_s,
        phase_mem_s,
        total_compute_s: p * phase_compute_s,
        total_mem_s,
        total_s,
        predicted_ops_per_s: cfg.shape.ops::<T>() / total_s,
        bound,
        ctc_steps,
        feed_efficiency: phase_compute_s / onchip,
    }
}

/// Roofline ceilings: `(on-chip ceiling, off-chip bandwidth * on-chip CTC)`.
///
/// The on-chip ceiling is the peak of the `A*B*C` cores scaled by how much
/// of each period the interface channels can keep them fed.
pub fn throughput_upper_bounds<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
) -> Result<(T, T)> {
    cfg.validate(spec)?;
    let dt = spec.dtype(cfg.shape.dtype)?;
    let ports = port_plan(cfg, spec)?;
    let feed = timing_with(cfg, spec, dt, &ports).feed_efficiency;
    let compute = peak_throughput(spec, dt, cfg.cores())? * feed;
    let memory = spec.offchip_bw_bytes_per_s * onchip_ctc::<T>(cfg, dt);
    Ok((compute, memory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{ArrayDims, BatchDims, MmShape, TileDims};
    use crate::platform::DataType;

    fn single(shape: u64) -> MappingConfig {
        MappingConfig {
            shape: MmShape::new(shape, shape, shape, DataType::FP32).unwrap(),
            tile: TileDims::cube(32),
            array: ArrayDims::new(1, 1, 1),
            batch: BatchDims::new(1, 1, 1),
            bf_lhs: 1,
            bf_rhs: 1,
        }
    }

    #[test]
    fn one_phase_has_no_overlap() {
        let p: PlatformSpec<f64> = PlatformSpec::vck190();
        let t = design_timing(&single(32), &p).unwrap();
        assert_eq!(t.phases, 1);
        // 4096 cycles at 1 GHz; 3 x 4 KiB at 25.6 GB/s
        let compute = 4096e-9;
        let mem = 12288.0 / 25.6e9;
        assert!((t.total_s - (compute + mem)).abs() < 1e-18);
        assert_eq!(t.bound, Bound::Compute);
    }

    #[test]
    fn infinite_bandwidth_reaches_peak() {
        let mut p: PlatformSpec<f64> = PlatformSpec::vck190();
        p.offchip_bw_bytes_per_s = f64::INFINITY;
        let mut c = single(256);
        c.array = ArrayDims::new(2, 4, 2);
        c.bf_lhs = 2;
        let t = design_timing(&c, &p).unwrap();
        let (peak, _) = throughput_upper_bounds(&c, &p).unwrap();
        assert_eq!(t.bound, Bound::Compute);
        assert!((t.predicted_ops_per_s / peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn starved_cores_are_plio_bound() {
        let mut p: PlatformSpec<f64> = PlatformSpec::vck190();
        p.offchip_bw_bytes_per_s = 1e18;
        let mut c = single(64);
        c.tile = TileDims::new(8, 2, 16);
        let t = design_timing(&c, &p).unwrap();
        assert_eq!(t.bound, Bound::Plio);
        assert!((t.feed_efficiency - 0.25).abs() < 1e-12);
        let (ceiling, _) = throughput_upper_bounds(&c, &p).unwrap();
        assert!((t.predicted_ops_per_s / ceiling - 1.0).abs() < 1e-9);
        assert_eq!(t.ctc_steps, 1);
    }

    #[test]
    fn memory_bound_scales_with_ctc() {
        let p: PlatformSpec<f64> = PlatformSpec::vck190();
        let (_, mem) = throughput_upper_bounds(&single(32), &p).unwrap();
        assert!((mem - 25.6e9 * 2.0 * 32768.0 / 12288.0).abs() < 1.0);
    }
}
