//! Four-level tiling of a matrix multiply and the metrics derived from it.
//!
//! Loop nest, outermost first:
//!
//! ```text
//! off-chip phases   m.0 n.0 k.0   bounds M/(TI*A*X), N/(TJ*C*Z), K/(TK*B*Y)
//! on-chip batches   m.1 n.1 k.1   bounds X, Z, Y
//! core array        m.2 n.2 k.2   bounds A, C, B   (k.2 runs down a column)
//! single core       m.3 n.3 k.3   bounds TI/PI, TJ/PJ, TK/PK
//! ```
//!
//! Shapes that do not divide are zero-padded up to the next multiple of the
//! off-chip block. Padding costs time but never counts as useful work.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{DataType, DataTypeSpec, PlatformSpec};
use crate::scalar::Scalar;

/// Vector instructions packed into one atomic kernel call.
pub const PACKED_INSTRUCTIONS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MmShape {
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub dtype: DataType,
}

impl MmShape {
    pub fn new(m: u64, k: u64, n: u64, dtype: DataType) -> Result<Self> {
        for (name, v) in [("M", m), ("K", k), ("N", n)] {
            if v == 0 {
                return Err(Error::NonPositive { field: name.into() });
            }
        }
        Ok(Self { m, k, n, dtype })
    }

    pub fn macs(&self) -> u64 {
        self.m * self.k * self.n
    }

    /// `2*M*N*K` operations.
    pub fn ops<T: Scalar>(&self) -> T {
        T::from_count(2) * T::from_count(self.m) * T::from_count(self.k) * T::from_count(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicDims {
    pub pi: u64,
    pub pj: u64,
    pub pk: u64,
}

impl AtomicDims {
    pub fn macs(&self) -> u64 {
        self.pi * self.pj * self.pk
    }

    pub(crate) fn check_against(&self, dt: &DataTypeSpec) -> Result<()> {
        let want = dt.macs_per_cycle_per_core * PACKED_INSTRUCTIONS;
        if self.macs() != want {
            return Err(Error::Invalid(format!(
                "atomic block {}x{}x{} for {} holds {} MACs, expected {}",
                self.pi,
                self.pj,
                self.pk,
                dt.name,
                self.macs(),
                want
            )));
        }
        Ok(())
    }
}

/// The block computed by one packed kernel call.
///
/// Unless the machine description overrides it, PJ is 2 and the remaining
/// `8 * macs_per_cycle` MACs are split between PI and PK as evenly as the
/// divisors allow, with PI >= PK. FP32 at 8 MAC/cycle gives 8x2x8.
pub fn atomic_dims(dt: &DataTypeSpec) -> AtomicDims {
    if let Some(a) = dt.atomic {
        return a;
    }
    let total = dt.macs_per_cycle_per_core * PACKED_INSTRUCTIONS;
    let pj = 2;
    let rest = total / pj;
    let mut pk = 1;
    let mut d = 1;
    while d * d <= rest {
        if rest.is_multiple_of(d) {
            pk = d;
        }
        d += 1;
    }
    AtomicDims {
        pi: rest / pk,
        pj,
        pk,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileDims {
    pub ti: u64,
    pub tj: u64,
    pub tk: u64,
}

impl TileDims {
    pub fn new(ti: u64, tj: u64, tk: u64) -> Self {
        Self { ti, tj, tk }
    }

    pub fn cube(t: u64) -> Self {
        Self::new(t, t, t)
    }

    pub fn check(&self, atomic: &AtomicDims) -> Result<()> {
        if self.ti == 0 || self.tj == 0 || self.tk == 0 {
            return Err(Error::Invalid(format!("tile {self} has a zero dimension")));
        }
        if !self.ti.is_multiple_of(atomic.pi)
            || !self.tj.is_multiple_of(atomic.pj)
            || !self.tk.is_multiple_of(atomic.pk)
        {
            return Err(Error::Invalid(format!(
                "tile {self} is not a multiple of the atomic block {}x{}x{}",
                atomic.pi, atomic.pj, atomic.pk
            )));
        }
        Ok(())
    }

    /// Elements of the larger input operand; it bounds one transfer step.
    pub(crate) fn operand_elems(&self) -> u64 {
        self.lhs_elems().max(self.rhs_elems())
    }

    fn lhs_elems(&self) -> u64 {
        self.ti * self.tk
    }
    fn rhs_elems(&self) -> u64 {
        self.tk * self.tj
    }
    fn out_elems(&self) -> u64 {
        self.ti * self.tj
    }
}

impl fmt::Display for TileDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.ti, self.tj, self.tk)
    }
}

/// Spatial unroll: `a * c` columns, each a `b`-deep reduction chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArrayDims {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl ArrayDims {
    pub fn new(a: u64, b: u64, c: u64) -> Self {
        Self { a, b, c }
    }

    pub fn cores(&self) -> u64 {
        self.a * self.b * self.c
    }

    pub fn columns(&self) -> u64 {
        self.a * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BatchDims {
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

impl BatchDims {
    pub fn new(x: u64, y: u64, z: u64) -> Self {
        Self { x, y, z }
    }

    pub fn count(&self) -> u64 {
        self.x * self.y * self.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingConfig {
    pub shape: MmShape,
    pub tile: TileDims,
    pub array: ArrayDims,
    pub batch: BatchDims,
    /// Columns sharing one LHS port (divides `c`).
    pub bf_lhs: u64,
    /// Columns sharing one RHS port (divides `a`).
    pub bf_rhs: u64,
}

/// Sort key used for the final tie-break between otherwise equal designs.
pub type ConfigKey = [u64; 11];

/// Iteration counts of the off-chip loops after padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterCounts {
    pub m0: u64,
    pub n0: u64,
    pub k0: u64,
}

impl OuterCounts {
    pub fn phases(&self) -> u64 {
        self.m0 * self.n0 * self.k0
    }
}

impl MappingConfig {
    pub fn with_shape(&self, shape: MmShape) -> Self {
        Self { shape, ..*self }
    }

    pub fn key(&self) -> ConfigKey {
        let (t, a, b) = (self.tile, self.array, self.batch);
        [
            t.ti,
            t.tj,
            t.tk,
            a.a,
            a.b,
            a.c,
            b.x,
            b.y,
            b.z,
            self.bf_lhs,
            self.bf_rhs,
        ]
    }

    pub fn cores(&self) -> u64 {
        self.array.cores()
    }

    /// Rows, inner and columns of one off-chip block (`X*A*TI`, `Y*B*TK`, `Z*C*TJ`).
    pub fn block(&self) -> (u64, u64, u64) {
        (
            self.batch.x * self.array.a * self.tile.ti,
            self.batch.y * self.array.b * self.tile.tk,
            self.batch.z * self.array.c * self.tile.tj,
        )
    }

    pub fn outer_counts(&self) -> OuterCounts {
        let (mb, kb, nb) = self.block();
        OuterCounts {
            m0: self.shape.m.div_ceil(mb),
            n0: self.shape.n.div_ceil(nb),
            k0: self.shape.k.div_ceil(kb),
        }
    }

    pub fn padded_shape(&self) -> MmShape {
        let (mb, kb, nb) = self.block();
        let o = self.outer_counts();
        MmShape {
            m: o.m0 * mb,
            k: o.k0 * kb,
            n: o.n0 * nb,
            dtype: self.shape.dtype,
        }
    }

    /// Structural checks: positive dims, atomic-multiple tile, dividing
    /// broadcast factors.
    pub fn validate<T: Scalar>(&self, spec: &PlatformSpec<T>) -> Result<()> {
        let dt = spec.dtype(self.shape.dtype)?;
        MmShape::new(self.shape.m, self.shape.k, self.shape.n, self.shape.dtype)?;
        self.tile.check(&atomic_dims(dt))?;
        let fields = [
            ("a", self.array.a),
            ("b", self.array.b),
            ("c", self.array.c),
            ("x", self.batch.x),
            ("y", self.batch.y),
            ("z", self.batch.z),
            ("bf_lhs", self.bf_lhs),
            ("bf_rhs", self.bf_rhs),
        ];
        for (field, v) in fields {
            if v == 0 {
                return Err(Error::NonPositive {
                    field: field.into(),
                });
            }
        }
        check_broadcast(self)
    }
}

pub(crate) fn check_broadcast(cfg: &MappingConfig) -> Result<()> {
    if cfg.bf_lhs == 0 || !cfg.array.c.is_multiple_of(cfg.bf_lhs) {
        return Err(Error::BroadcastFactor {
            factor: cfg.bf_lhs,
            dim: "C",
            extent: cfg.array.c,
        });
    }
    if cfg.bf_rhs == 0 || !cfg.array.a.is_multiple_of(cfg.bf_rhs) {
        return Err(Error::BroadcastFactor {
            factor: cfg.bf_rhs,
            dim: "A",
            extent: cfg.array.a,
        });
    }
    Ok(())
}

impl fmt::Display for MappingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}x{}x{} tile {} array {}x{}x{} batch {}x{}x{} bf {}/{}",
            self.shape.dtype,
            self.shape.m,
            self.shape.k,
            self.shape.n,
            self.tile,
            self.array.a,
            self.array.b,
            self.array.c,
            self.batch.x,
            self.batch.y,
            self.batch.z,
            self.bf_lhs,
            self.bf_rhs
        )
    }
}

/// Ideal back-to-back issue: `TI*TJ*TK / macs_per_cycle`.
pub fn single_core_compute_cycles(tile: &TileDims, dt: &DataTypeSpec) -> u64 {
    (tile.ti * tile.tj * tile.tk).div_ceil(dt.macs_per_cycle_per_core)
}

/// LHS and RHS arrive on separate channels; the larger operand bounds the step.
pub fn single_core_transfer_cycles<T: Scalar>(
    tile: &TileDims,
    dt: &DataTypeSpec,
    spec: &PlatformSpec<T>,
) -> u64 {
    (tile.operand_elems() * dt.bytes_per_element).div_ceil(spec.channel_bytes_per_core_cycle)
}

pub fn core_ctc<T: Scalar>(tile: &TileDims, dt: &DataTypeSpec, spec: &PlatformSpec<T>) -> T {
    T::from_count(single_core_compute_cycles(tile, dt))
        / T::from_count(single_core_transfer_cycles(tile, dt, spec))
}

/// Double-buffered LHS and RHS windows plus a ping-pong output window.
pub fn core_local_bytes(tile: &TileDims, dt: &DataTypeSpec) -> u64 {
    let b = dt.bytes_per_element;
    2 * (tile.lhs_elems() + tile.rhs_elems()) * b + 2 * tile.out_elems() * b
}

pub fn local_memory_cap<T>(spec: &PlatformSpec<T>, strict: bool) -> u64 {
    if strict {
        spec.local_mem_bytes
    } else {
        spec.neighbor_mem_bytes
    }
}

/// Double-buffered LHS, RHS and output regions for one off-chip block.
pub fn pl_buffer_bytes_used(cfg: &MappingConfig, dt: &DataTypeSpec) -> u64 {
    let (mb, kb, nb) = cfg.block();
    2 * dt.bytes_per_element * (mb * kb + kb * nb + mb * nb)
}

/// Off-chip traffic of the whole (padded) multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffchipTraffic {
    pub outer: OuterCounts,
    /// LHS plus RHS bytes loaded every phase.
    pub operand_bytes_per_phase: u64,
    /// Output bytes written once per (m.0, n.0) pair.
    pub output_bytes_per_block: u64,
}

impl OffchipTraffic {
    pub fn of(cfg: &MappingConfig, dt: &DataTypeSpec) -> Self {
        let (mb, kb, nb) = cfg.block();
        let b = dt.bytes_per_element;
        Self {
            outer: cfg.outer_counts(),
            operand_bytes_per_phase: (mb * kb + kb * nb) * b,
            output_bytes_per_block: mb * nb * b,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.outer.phases() * self.operand_bytes_per_phase
            + self.outer.m0 * self.outer.n0 * self.output_bytes_per_block
    }

    /// Average bytes per phase, output amortized over the k.0 loop.
    pub fn bytes_per_phase<T: Scalar>(&self) -> T {
        T::from_count(self.total_bytes()) / T::from_count(self.outer.phases())
    }
}

/// Operations per off-chip byte for the padded problem.
pub fn onchip_ctc<T: Scalar>(cfg: &MappingConfig, dt: &DataTypeSpec) -> T {
    let padded = cfg.padded_shape();
    padded.ops::<T>() / T::from_count(OffchipTraffic::of(cfg, dt).total_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DerivedMetrics<T> {
    pub compute_cycles: u64,
    pub transfer_cycles: u64,
    pub ctc: T,
    pub core_local_bytes: u64,
    pub pl_buffer_bytes_used: u64,
    pub cores: u64,
    pub onchip_ctc: T,
}

pub fn derived_metrics<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
) -> Result<DerivedMetrics<T>> {
    cfg.validate(spec)?;
    let dt = spec.dtype(cfg.shape.dtype)?;
    Ok(DerivedMetrics {
        compute_cycles: single_core_compute_cycles(&cfg.tile, dt),
        transfer_cycles: single_core_transfer_cycles(&cfg.tile, dt, spec),
        ctc: core_ctc(&cfg.tile, dt, spec),
        core_local_bytes: core_local_bytes(&cfg.tile, dt),
        pl_buffer_bytes_used: pl_buffer_bytes_used(cfg, dt),
        cores: cfg.cores(),
        onchip_ctc: onchip_ctc(cfg, dt),
    })
}
