//! Independent re-implementations used as test oracles. Nothing here calls
//! the library's own feasibility, port or congestion code.

#![allow(dead_code)]

use std::cmp::Ordering;

use mmdse::mapping::{ArrayDims, BatchDims, MappingConfig, MmShape, TileDims};
use mmdse::pipesim::design_timing;
use mmdse::platform::{DataType, DataTypeSpec, PlatformSpec};
use rand::Rng;

pub fn oracle_atomic(dt: &DataTypeSpec) -> (u64, u64, u64) {
    if let Some(a) = dt.atomic {
        return (a.pi, a.pj, a.pk);
    }
    let rest = dt.macs_per_cycle_per_core * 16 / 2;
    let pk = (1..=rest)
        .filter(|d| rest.is_multiple_of(*d) && d * d <= rest)
        .max()
        .unwrap();
    (rest / pk, 2, pk)
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Boundary loads of the input trunks, each trunk spanning the columns its
/// stream reaches.
fn oracle_max_load(cfg: &MappingConfig, p: u64) -> u64 {
    let (a, b, c) = (cfg.array.a, cfg.array.b, cfg.array.c);
    let mut load = vec![0u64; (a * c) as usize];
    let mut add = |lo: u64, hi: u64| {
        for i in lo..hi {
            load[i as usize] += 1;
        }
    };
    // LHS: cores (m2, k2) in m2-major order, p per packet group
    let n_lhs = a * b;
    let mut start = 0;
    while start < n_lhs {
        let end = (start + p).min(n_lhs);
        let (m_lo, m_hi) = (start / b, (end - 1) / b);
        for g in 0..c / cfg.bf_lhs {
            add(
                m_lo * c + g * cfg.bf_lhs,
                m_hi * c + (g + 1) * cfg.bf_lhs - 1,
            );
        }
        start = end;
    }
    // RHS: cores (n2, k2) in n2-major order
    let n_rhs = c * b;
    let mut start = 0;
    while start < n_rhs {
        let end = (start + p).min(n_rhs);
        let (n_lo, n_hi) = (start / b, (end - 1) / b);
        for h in 0..a / cfg.bf_rhs {
            add(
                h * cfg.bf_rhs * c + n_lo,
                ((h + 1) * cfg.bf_rhs - 1) * c + n_hi,
            );
        }
        start = end;
    }
    load.into_iter().max().unwrap_or(0)
}

pub fn oracle_feasible(cfg: &MappingConfig, spec: &PlatformSpec<f64>, strict: bool) -> bool {
    let dt = spec
        .dtypes
        .iter()
        .find(|d| d.name == cfg.shape.dtype)
        .unwrap();
    let (pi, pj, pk) = oracle_atomic(dt);
    let TileDims { ti, tj, tk } = cfg.tile;
    let ArrayDims { a, b, c } = cfg.array;
    let BatchDims { x, y, z } = cfg.batch;
    let e = dt.bytes_per_element;
    if ti % pi != 0 || tj % pj != 0 || tk % pk != 0 || c % cfg.bf_lhs != 0 || a % cfg.bf_rhs != 0 {
        return false;
    }
    if a * b * c > spec.rows * spec.cols {
        return false;
    }
    let cap = if strict {
        spec.local_mem_bytes
    } else {
        spec.neighbor_mem_bytes
    };
    if 2 * (ti * tk + tk * tj) * e + 2 * ti * tj * e > cap {
        return false;
    }
    let (mb, kb, nb) = (x * a * ti, y * b * tk, z * c * tj);
    if 2 * e * (mb * kb + kb * nb + mb * nb) > spec.pl_buffer_bytes {
        return false;
    }
    let compute = ceil_div(ti * tj * tk, dt.macs_per_cycle_per_core);
    let transfer = ceil_div(
        (ti * tk).max(tk * tj) * e,
        spec.channel_bytes_per_core_cycle,
    );
    let p = (compute / transfer)
        .min(spec.max_packet_factor)
        .min(b)
        .max(1);
    let lhs = ceil_div(a * b, p) * (c / cfg.bf_lhs);
    let rhs = ceil_div(c * b, p) * (a / cfg.bf_rhs);
    let out = ceil_div(a * c, p);
    if lhs + rhs > spec.num_interface_tiles * spec.in_channels_per_tile
        || out > spec.num_interface_tiles * spec.out_channels_per_tile
    {
        return false;
    }
    oracle_max_load(cfg, p) <= spec.switch_ew_ports
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub cfg: MappingConfig,
    pub score: f64,
    pub pl: u64,
}

pub fn oracle_rank(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap()
        .then(a.cfg.cores().cmp(&b.cfg.cores()))
        .then(a.pl.cmp(&b.pl))
        .then(a.cfg.key().cmp(&b.cfg.key()))
}

pub struct BruteSpace {
    pub tiles: Vec<TileDims>,
    pub max_abc: (u64, u64, u64),
    pub max_xyz: (u64, u64, u64),
}

/// Every feasible config of the space, best first.
pub fn brute_force(
    shape: MmShape,
    spec: &PlatformSpec<f64>,
    space: &BruteSpace,
) -> (Vec<Scored>, u64) {
    let e = spec
        .dtypes
        .iter()
        .find(|d| d.name == shape.dtype)
        .unwrap()
        .bytes_per_element;
    let mut out = Vec::new();
    let mut raw = 0;
    for &tile in &space.tiles {
        for a in 1..=space.max_abc.0 {
            for b in 1..=space.max_abc.1 {
                for c in 1..=space.max_abc.2 {
                    for bf_lhs in 1..=c {
                        for bf_rhs in 1..=a {
                            for x in 1..=space.max_xyz.0 {
                                for y in 1..=space.max_xyz.1 {
                                    for z in 1..=space.max_xyz.2 {
                                        raw += 1;
                                        let cfg = MappingConfig {
                                            shape,
                                            tile,
                                            array: ArrayDims { a, b, c },
                                            batch: BatchDims { x, y, z },
                                            bf_lhs,
                                            bf_rhs,
                                        };
                                        if !oracle_feasible(&cfg, spec, true) {
                                            continue;
                                        }
                                        let score =
                                            design_timing(&cfg, spec).unwrap().predicted_ops_per_s;
                                        let (mb, kb, nb) =
                                            (x * a * tile.ti, y * b * tile.tk, z * c * tile.tj);
                                        let pl = 2 * e * (mb * kb + kb * nb + mb * nb);
                                        out.push(Scored { cfg, score, pl });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by(oracle_rank);
    (out, raw)
}

pub fn toy_platform<R: Rng>(rng: &mut R) -> PlatformSpec<f64> {
    let local = [16384u64, 32768][rng.gen_range(0..2)];
    PlatformSpec {
        name: "toy".into(),
        rows: rng.gen_range(1..=3),
        cols: rng.gen_range(1..=4),
        core_clock_hz: 1e9,
        local_mem_bytes: local,
        neighbor_mem_bytes: 4 * local,
        num_interface_tiles: rng.gen_range(1..=3),
        in_channels_per_tile: rng.gen_range(1..=4),
        out_channels_per_tile: rng.gen_range(1..=3),
        channel_bytes_per_core_cycle: [2u64, 4, 8][rng.gen_range(0..3)],
        pl_clock_hz: 2.3e8,
        pl_channel_bytes_per_pl_cycle: None,
        pl_buffer_bytes: rng.gen_range(20_000..2_000_000),
        offchip_bw_bytes_per_s: rng.gen_range(1e9..1e11),
        max_packet_factor: rng.gen_range(1..=4),
        switch_ew_ports: rng.gen_range(1..=3),
        dtypes: vec![DataTypeSpec {
            name: DataType::FP32,
            bytes_per_element: 4,
            macs_per_cycle_per_core: [4u64, 8, 16][rng.gen_range(0..3)],
            atomic: None,
        }],
    }
}

/// Power-of-two multiples of the atomic block that fit `cap` bytes.
pub fn small_tiles(dt: &DataTypeSpec, cap: u64) -> Vec<TileDims> {
    let (pi, pj, pk) = oracle_atomic(dt);
    let mut v = Vec::new();
    for mi in [1, 2, 4] {
        for mj in [1, 4, 16] {
            for mk in [1, 2, 4] {
                let t = TileDims {
                    ti: pi * mi,
                    tj: pj * mj,
                    tk: pk * mk,
                };
                let e = dt.bytes_per_element;
                if 2 * (t.ti * t.tk + t.tk * t.tj) * e + 2 * t.ti * t.tj * e <= cap {
                    v.push(t);
                }
            }
        }
    }
    v
}
