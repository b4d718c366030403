//! Design-space exploration: enumerate every feasible mapping inside the
//! search limits, evaluate each with the timing model and rank them.
//!
//! Ranking is by predicted ops/s (descending), then fewer cores, then a
//! smaller PL buffer footprint, then the smallest [`ConfigKey`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interconnect::{congestion, port_plan, CongestionReport, PortPlan};
use crate::mapping::{
    atomic_dims, core_local_bytes, derived_metrics, local_memory_cap, pl_buffer_bytes_used,
    ArrayDims, BatchDims, ConfigKey, DerivedMetrics, MappingConfig, MmShape, TileDims,
};
use crate::pipesim::timing::timing_with;
use crate::pipesim::{design_timing, DesignTiming};
use crate::platform::{DataType, DataTypeSpec, PlatformSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Explicit tile list. `None` generates power-of-two multiples of the
    /// atomic block up to `max_tile_dim` that fit the memory cap.
    pub tiles: Option<Vec<TileDims>>,
    pub max_tile_dim: u64,
    pub max_a: u64,
    pub max_b: u64,
    pub max_c: u64,
    pub max_x: u64,
    pub max_y: u64,
    pub max_z: u64,
    pub strict_memory: bool,
    /// Stop after this many feasible candidates (in enumeration order).
    pub max_candidates: Option<u64>,
    pub top_k: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            tiles: None,
            max_tile_dim: 64,
            max_a: 16,
            max_b: 8,
            max_c: 16,
            max_x: 4,
            max_y: 4,
            max_z: 4,
            strict_memory: true,
            max_candidates: None,
            top_k: 5,
        }
    }
}

impl SearchLimits {
    pub fn check(&self) -> Result<()> {
        let fields = [
            ("max_tile_dim", self.max_tile_dim),
            ("max_a", self.max_a),
            ("max_b", self.max_b),
            ("max_c", self.max_c),
            ("max_x", self.max_x),
            ("max_y", self.max_y),
            ("max_z", self.max_z),
            ("max_candidates", self.max_candidates.unwrap_or(1)),
            ("top_k", self.top_k as u64),
        ];
        for (field, v) in fields {
            if v == 0 {
                return Err(Error::NonPositive {
                    field: field.into(),
                });
            }
        }
        Ok(())
    }
}

/// One violated constraint, in the order `feasible` checks them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    Tiling {
        reason: String,
    },
    ArraySize {
        cores: u64,
        available: u64,
    },
    LocalMemory {
        used: u64,
        cap: u64,
    },
    PlBuffer {
        used: u64,
        cap: u64,
    },
    Ports {
        in_used: u64,
        in_available: u64,
        out_used: u64,
        out_available: u64,
    },
    Congestion {
        max_load: u64,
        ew_ports: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Tiling { reason } => write!(f, "tiling: {reason}"),
            Violation::ArraySize { cores, available } => {
                write!(f, "array size: {cores} cores > {available}")
            }
            Violation::LocalMemory { used, cap } => write!(f, "local memory: {used} B > {cap} B"),
            Violation::PlBuffer { used, cap } => write!(f, "pl buffer: {used} B > {cap} B"),
            Violation::Ports {
                in_used,
                in_available,
                out_used,
                out_available,
            } => write!(
                f,
                "ports: {in_used}/{in_available} input, {out_used}/{out_available} output"
            ),
            Violation::Congestion { max_load, ew_ports } => {
                write!(
                    f,
                    "congestion: {max_load} trunks across one boundary > {ew_ports}"
                )
            }
        }
    }
}

pub fn describe_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Every violated constraint of `cfg`; empty means feasible.
pub fn feasible<T: Scalar>(
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
    strict_memory: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let dt = match spec.dtype(cfg.shape.dtype) {
        Ok(dt) => dt,
        Err(e) => {
            out.push(Violation::Tiling {
                reason: e.to_string(),
            });
            return out;
        }
    };
    let structural = cfg.validate(spec);
    if let Err(e) = &structural {
        out.push(Violation::Tiling {
            reason: e.to_string(),
        });
    }
    if cfg.cores() > spec.cores() {
        out.push(Violation::ArraySize {
            cores: cfg.cores(),
            available: spec.cores(),
        });
    }
    let (used, cap) = (
        core_local_bytes(&cfg.tile, dt),
        local_memory_cap(spec, strict_memory),
    );
    if used > cap {
        out.push(Violation::LocalMemory { used, cap });
    }
    let used = pl_buffer_bytes_used(cfg, dt);
    if used > spec.pl_buffer_bytes {
        out.push(Violation::PlBuffer {
            used,
            cap: spec.pl_buffer_bytes,
        });
    }
    if structural.is_ok() {
        out.extend(routing_violations(cfg, spec));
    }
    out
}

fn routing_violations<T: Scalar>(cfg: &MappingConfig, spec: &PlatformSpec<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Ok(p) = port_plan(cfg, spec) {
        if !p.feasible {
            out.push(Violation::Ports {
                in_used: p.total_in,
                in_available: spec.total_in_channels(),
                out_used: p.total_out,
                out_available: spec.total_out_channels(),
            });
        }
    }
    if let Ok(c) = congestion(cfg, spec, None) {
        if !c.feasible {
            out.push(Violation::Congestion {
                max_load: c.max_segments_per_boundary,
                ew_ports: spec.switch_ew_ports,
            });
        }
    }
    out
}

fn powers_from(base: u64, max: u64) -> Vec<u64> {
    let mut v = vec![base];
    let mut x = base * 2;
    while x <= max {
        v.push(x);
        x *= 2;
    }
    v
}

/// Tiles searched for `dtype`, in ascending `(ti, tj, tk)` order.
pub fn candidate_tiles<T>(
    dt: &DataTypeSpec,
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
) -> Vec<TileDims> {
    if let Some(t) = &limits.tiles {
        return t.clone();
    }
    let at = atomic_dims(dt);
    let cap = local_memory_cap(spec, limits.strict_memory);
    let mut tiles = Vec::new();
    for &ti in &powers_from(at.pi, limits.max_tile_dim) {
        for &tj in &powers_from(at.pj, limits.max_tile_dim) {
            for &tk in &powers_from(at.pk, limits.max_tile_dim) {
                let t = TileDims::new(ti, tj, tk);
                if core_local_bytes(&t, dt) <= cap {
                    tiles.push(t);
                }
            }
        }
    }
    tiles
}

fn divisors(n: u64) -> impl Iterator<Item = u64> {
    (1..=n).filter(move |d| n.is_multiple_of(*d))
}

/// Walks the feasible space in enumeration order, pruning whole subtrees as
/// soon as an outer level fails. `visit` returns `false` to stop.
fn walk<T: Scalar>(
    shape: MmShape,
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
    mut visit: impl FnMut(&MappingConfig, &PortPlan) -> bool,
) -> Result<()> {
    limits.check()?;
    let dt = spec.dtype(shape.dtype)?;
    let atomic = atomic_dims(dt);
    let mem_cap = local_memory_cap(spec, limits.strict_memory);
    let mut routable_cache: HashMap<[u64; 6], bool> = HashMap::new();
    for tile in candidate_tiles(dt, spec, limits) {
        if tile.check(&atomic).is_err() || core_local_bytes(&tile, dt) > mem_cap {
            continue;
        }
        for a in 1..=limits.max_a {
            for b in 1..=limits.max_b {
                for c in 1..=limits.max_c {
                    if a * b * c > spec.cores() {
                        continue;
                    }
                    for bf_lhs in divisors(c) {
                        for bf_rhs in divisors(a) {
                            let mut cfg = MappingConfig {
                                shape,
                                tile,
                                array: ArrayDims::new(a, b, c),
                                batch: BatchDims::new(1, 1, 1),
                                bf_lhs,
                                bf_rhs,
                            };
                            let ports = port_plan(&cfg, spec)?;
                            if !ports.feasible {
                                continue;
                            }
                            // routing depends on the tile only through the packet factor
                            let route_key = [a, b, c, bf_lhs, bf_rhs, ports.packet_factor];
                            let routable = match routable_cache.get(&route_key) {
                                Some(&r) => r,
                                None => {
                                    let r = congestion(&cfg, spec, None)?.feasible;
                                    routable_cache.insert(route_key, r);
                                    r
                                }
                            };
                            if !routable {
                                continue;
                            }
                            for x in 1..=limits.max_x {
                                for y in 1..=limits.max_y {
                                    for z in 1..=limits.max_z {
                                        cfg.batch = BatchDims::new(x, y, z);
                                        if pl_buffer_bytes_used(&cfg, dt) > spec.pl_buffer_bytes {
                                            continue;
                                        }
                                        if !visit(&cfg, &ports) {
                                            return Ok(());
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Feasible configs in enumeration order: tile, A, B, C, bf_lhs, bf_rhs, X, Y, Z.
pub fn enumerate<T: Scalar>(
    shape: MmShape,
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
) -> Result<Vec<MappingConfig>> {
    let mut out = Vec::new();
    let cap = limits.max_candidates.unwrap_or(u64::MAX);
    walk(shape, spec, limits, |cfg, _| {
        out.push(*cfg);
        (out.len() as u64) < cap
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RankedDesign<T> {
    pub config: MappingConfig,
    pub predicted_ops_per_s: T,
    pub cores: u64,
    pub pl_buffer_bytes_used: u64,
}

impl<T: Scalar> RankedDesign<T> {
    /// Better designs sort first.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .predicted_ops_per_s
            .partial_cmp(&self.predicted_ops_per_s)
            .unwrap_or(Ordering::Equal)
            .then(self.cores.cmp(&other.cores))
            .then(self.pl_buffer_bytes_used.cmp(&other.pl_buffer_bytes_used))
            .then(self.config.key().cmp(&other.config.key()))
    }

    pub fn key(&self) -> ConfigKey {
        self.config.key()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LayerTiming<T> {
    pub shape: MmShape,
    pub timing: DesignTiming<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ModelEvaluation<T> {
    pub layers: Vec<LayerTiming<T>>,
    pub total_s: T,
    pub aggregate_ops_per_s: T,
}

fn check_layers(layers: &[MmShape]) -> Result<DataType> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Workload("at least one layer is required".into()))?;
    if let Some(l) = layers.iter().find(|l| l.dtype != first.dtype) {
        return Err(Error::Workload(format!(
            "all layers must share one data type ({} vs {})",
            first.dtype, l.dtype
        )));
    }
    Ok(first.dtype)
}

/// Runs every layer, one after another, on the same array configuration.
pub fn evaluate_model<T: Scalar>(
    layers: &[MmShape],
    cfg: &MappingConfig,
    spec: &PlatformSpec<T>,
) -> Result<ModelEvaluation<T>> {
    check_layers(layers)?;
    let mut out = Vec::with_capacity(layers.len());
    let mut total = T::zero();
    let mut ops = T::zero();
    for shape in layers {
        let timing = design_timing(&cfg.with_shape(*shape), spec)?;
        total = total + timing.total_s;
        ops = ops + shape.ops::<T>();
        out.push(LayerTiming {
            shape: *shape,
            timing,
        });
    }
    Ok(ModelEvaluation {
        layers: out,
        total_s: total,
        aggregate_ops_per_s: ops / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DseResult<T> {
    pub best: MappingConfig,
    pub metrics: DerivedMetrics<T>,
    pub ports: PortPlan,
    pub congestion: CongestionReport,
    /// Timing of the first layer.
    pub timing: DesignTiming<T>,
    pub layers: Vec<LayerTiming<T>>,
    pub aggregate_ops_per_s: T,
    /// Best designs first, the winner included.
    pub ranked_alternatives: Vec<RankedDesign<T>>,
    pub candidates_evaluated: u64,
    /// The candidate budget ran out before the space was exhausted.
    pub truncated: bool,
}

pub fn search<T: Scalar>(
    shape: MmShape,
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
) -> Result<DseResult<T>> {
    search_model(&[shape], spec, limits)
}

/// Best single configuration for a sequence of layers, scored by
/// `sum(ops) / sum(total_s)`.
pub fn search_model<T: Scalar>(
    layers: &[MmShape],
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
) -> Result<DseResult<T>> {
    check_layers(layers)?;
    let dt = spec.dtype(layers[0].dtype)?;
    let total_ops = layers.iter().fold(T::zero(), |acc, l| acc + l.ops::<T>());
    let k = limits.top_k.max(1);
    let budget = limits.max_candidates.unwrap_or(u64::MAX);
    let mut top: Vec<RankedDesign<T>> = Vec::with_capacity(k + 1);
    let mut evaluated = 0u64;
    let mut truncated = false;

    walk(layers[0], spec, limits, |cfg, ports| {
        if evaluated == budget {
            truncated = true;
            return false;
        }
        evaluated += 1;
        let mut total = T::zero();
        for shape in layers {
            total = total + timing_with(&cfg.with_shape(*shape), spec, dt, ports).total_s;
        }
        let cand = RankedDesign {
            config: *cfg,
            predicted_ops_per_s: total_ops / total,
            cores: cfg.cores(),
            pl_buffer_bytes_used: pl_buffer_bytes_used(cfg, dt),
        };
        if top.len() < k || cand.rank_cmp(&top[top.len() - 1]) == Ordering::Less {
            let pos = top.partition_point(|d| d.rank_cmp(&cand) == Ordering::Less);
            top.insert(pos, cand);
            top.truncate(k);
        }
        true
    })?;

    let Some(winner) = top.first() else {
        let (nearest, violations) = nearest_infeasible(layers[0], spec, limits);
        return Err(Error::NoFeasible {
            nearest: nearest.map(Box::new),
            violations,
        });
    };
    let best = winner.config;
    let eval = evaluate_model(layers, &best, spec)?;
    Ok(DseResult {
        best,
        metrics: derived_metrics(&best, spec)?,
        ports: port_plan(&best, spec)?,
        congestion: congestion(&best, spec, None)?,
        timing: eval.layers[0].timing.clone(),
        layers: eval.layers,
        aggregate_ops_per_s: eval.aggregate_ops_per_s,
        ranked_alternatives: top,
        candidates_evaluated: evaluated,
        truncated,
    })
}

/// Candidate with the fewest violations among unit-batch, unit-broadcast
/// configs of the search space.
fn nearest_infeasible<T: Scalar>(
    shape: MmShape,
    spec: &PlatformSpec<T>,
    limits: &SearchLimits,
) -> (Option<MappingConfig>, Vec<Violation>) {
    let Ok(dt) = spec.dtype(shape.dtype) else {
        return (None, Vec::new());
    };
    let mut best: Option<(MappingConfig, Vec<Violation>)> = None;
    for tile in candidate_tiles(dt, spec, limits) {
        for a in 1..=limits.max_a {
            for b in 1..=limits.max_b {
                for c in 1..=limits.max_c {
                    let cfg = MappingConfig {
                        shape,
                        tile,
                        array: ArrayDims::new(a, b, c),
                        batch: BatchDims::new(1, 1, 1),
                        bf_lhs: 1,
                        bf_rhs: 1,
                    };
                    let v = feasible(&cfg, spec, limits.strict_memory);
                    let better = match &best {
                        None => true,
                        Some((bc, bv)) => (v.len(), cfg.key()) < (bv.len(), bc.key()),
                    };
                    if better {
                        best = Some((cfg, v));
                    }
                }
            }
        }
    }
    match best {
        Some((c, v)) => (Some(c), v),
        None => (None, Vec::new()),
    }
}
