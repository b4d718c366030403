mod common;

use std::collections::HashSet;

use approx::assert_relative_eq;
use mmdse::dse::{enumerate, feasible, search, SearchLimits};
use mmdse::interconnect::{packet_factor, port_plan, streams, Operand};
use mmdse::mapping::{
    core_local_bytes, pl_buffer_bytes_used, ArrayDims, BatchDims, MappingConfig, MmShape, TileDims,
};
use mmdse::pipesim::{
    design_timing, read_timeline_csv, simulate_column, throughput_upper_bounds, timeline_events,
    write_timeline_csv, ColumnSimParams,
};
use mmdse::platform::{load_platform, DataType, PlatformSpec};
use mmdse::schedule::{lex_order, validate_order, zigzag_order, TileRef};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vck() -> PlatformSpec<f64> {
    PlatformSpec::vck190()
}

prop_compose! {
    fn structural_cfg()(
        ti in prop::sample::select(vec![8u64, 16, 32]),
        tj in prop::sample::select(vec![2u64, 8, 16, 32]),
        tk in prop::sample::select(vec![8u64, 16, 32]),
        a in 1u64..=8, b in 1u64..=6, c in 1u64..=8,
        x in 1u64..=3, y in 1u64..=3, z in 1u64..=3,
        bl in 0usize..8, br in 0usize..8,
        m in 1u64..=2048, k in 1u64..=2048, n in 1u64..=2048,
    ) -> MappingConfig {
        let pick = |n: u64, i: usize| {
            let d: Vec<u64> = (1..=n).filter(|d| n.is_multiple_of(*d)).collect();
            d[i % d.len()]
        };
        MappingConfig {
            shape: MmShape::new(m, k, n, DataType::FP32).unwrap(),
            tile: TileDims::new(ti, tj, tk),
            array: ArrayDims::new(a, b, c),
            batch: BatchDims::new(x, y, z),
            bf_lhs: pick(c, bl),
            bf_rhs: pick(a, br),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn padding_covers_the_shape(cfg in structural_cfg()) {
        let p = cfg.padded_shape();
        let (mb, kb, nb) = cfg.block();
        prop_assert!(p.m >= cfg.shape.m && p.k >= cfg.shape.k && p.n >= cfg.shape.n);
        prop_assert!(p.m % mb == 0 && p.k % kb == 0 && p.n % nb == 0);
        prop_assert!(p.m - cfg.shape.m < mb);
    }

    #[test]
    fn pl_buffer_grows_with_batching(cfg in structural_cfg()) {
        let spec = vck();
        let dt = spec.dtype(DataType::FP32).unwrap();
        let mut bigger = cfg;
        bigger.batch.x += 1;
        prop_assert!(pl_buffer_bytes_used(&bigger, dt) > pl_buffer_bytes_used(&cfg, dt));
        let mut wider = cfg.tile;
        wider.ti *= 2;
        prop_assert!(core_local_bytes(&wider, dt) > core_local_bytes(&cfg.tile, dt));
    }

    #[test]
    fn every_core_gets_one_lhs_and_one_rhs_stream(cfg in structural_cfg()) {
        let spec = vck();
        let p = packet_factor(&cfg, &spec).unwrap();
        prop_assert!(p >= 1 && p <= spec.max_packet_factor.min(cfg.array.b));
        let all = streams(&cfg, p);
        let plan = port_plan(&cfg, &spec).unwrap();
        for op in [Operand::Lhs, Operand::Rhs] {
            let ss: Vec<_> = all.iter().filter(|s| s.operand == op).collect();
            let want = if op == Operand::Lhs { plan.lhs_in_ports } else { plan.rhs_in_ports };
            prop_assert_eq!(ss.len() as u64, want);
            let mut seen = HashSet::new();
            for s in ss {
                for d in &s.destinations {
                    prop_assert!(seen.insert((d.column, d.row)), "core fed twice");
                }
            }
            prop_assert_eq!(seen.len() as u64, cfg.cores());
        }
        let outs = all.iter().filter(|s| s.operand == Operand::Out).count() as u64;
        prop_assert_eq!(outs, plan.out_ports);
    }

    #[test]
    fn broadcast_never_adds_ports(cfg in structural_cfg()) {
        let spec = vck();
        let mut unicast = cfg;
        unicast.bf_lhs = 1;
        unicast.bf_rhs = 1;
        let (with, without) = (port_plan(&cfg, &spec).unwrap(), port_plan(&unicast, &spec).unwrap());
        prop_assert!(with.total_in <= without.total_in);
        prop_assert_eq!(with.lhs_in_ports * cfg.bf_lhs, without.lhs_in_ports);
    }

    #[test]
    fn timing_respects_roofline(cfg in structural_cfg(), scale in 0.01f64..100.0) {
        let mut spec = vck();
        spec.offchip_bw_bytes_per_s *= scale;
        let t = design_timing(&cfg, &spec).unwrap();
        let (compute, memory) = throughput_upper_bounds(&cfg, &spec).unwrap();
        prop_assert!(t.predicted_ops_per_s <= compute.min(memory) * (1.0 + 1e-12));
        let mut faster = spec.clone();
        faster.offchip_bw_bytes_per_s *= 2.0;
        prop_assert!(design_timing(&cfg, &faster).unwrap().predicted_ops_per_s >= t.predicted_ops_per_s);
    }

    #[test]
    fn single_precision_agrees(cfg in structural_cfg()) {
        let t64 = design_timing(&cfg, &vck()).unwrap();
        let t32 = design_timing(&cfg, &PlatformSpec::<f32>::vck190()).unwrap();
        assert_relative_eq!(t32.predicted_ops_per_s as f64, t64.predicted_ops_per_s, max_relative = 1e-4);
        prop_assert_eq!(t32.phases, t64.phases);
    }

    #[test]
    fn orders_are_permutations(n in 1u64..10, d in 1u64..10) {
        let z = zigzag_order(n, d);
        prop_assert!(validate_order(&z).is_ok());
        prop_assert!(validate_order(&lex_order(n, d)).is_ok());
        let diags: Vec<u64> = z.tiles.iter().map(TileRef::diagonal).collect();
        prop_assert!(diags.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn simulation_respects_dependencies(n in 1u64..7, d in 1u64..7, ctc in 1u64..7, banks in 1u64..4, zig in any::<bool>()) {
        let order = if zig { zigzag_order(n, d) } else { lex_order(n, d) };
        let params = ColumnSimParams::new(d, n, ctc).with_banks(banks);
        let r = simulate_column(&order, &params).unwrap();
        prop_assert_eq!(r.transfers.len() as u64, n * d);
        prop_assert_eq!(r.per_core_timeline.len() as u64, n * d);
        for s in &r.per_core_timeline {
            prop_assert_eq!(s.end_step - s.start_step + 1, ctc);
            let delivered = r.delivery_step(TileRef::new(s.batch, s.core)).unwrap();
            prop_assert!(delivered < s.start_step);
            if s.core > 0 {
                let pred = r.per_core_timeline.iter().find(|p| p.core == s.core - 1 && p.batch == s.batch).unwrap();
                prop_assert!(pred.end_step < s.start_step, "partial sum read before written");
            }
        }
        for core in 0..d {
            let mut spans: Vec<_> = r.per_core_timeline.iter().filter(|s| s.core == core).collect();
            spans.sort_by_key(|s| s.start_step);
            prop_assert!(spans.windows(2).all(|w| w[0].end_step < w[1].start_step && w[0].batch < w[1].batch));
        }
        // one transfer per step at most, and nothing finishes after the makespan
        let steps: HashSet<u64> = r.transfers.iter().map(|t| t.step).collect();
        prop_assert_eq!(steps.len(), r.transfers.len());
        prop_assert!(r.per_core_timeline.iter().all(|s| s.end_step <= r.makespan_steps));
        prop_assert!(r.makespan_steps >= (n + d - 1) * ctc);

        let events = timeline_events(&r);
        let mut buf = Vec::new();
        write_timeline_csv(&events, &mut buf).unwrap();
        prop_assert_eq!(read_timeline_csv(&buf[..]).unwrap(), events);
    }

    #[test]
    fn platform_document_round_trips(rows in 1u64..16, cols in 1u64..64, bw in 1e8f64..1e12, pl in 1u64..100_000_000) {
        let mut spec = vck();
        spec.rows = rows;
        spec.cols = cols;
        spec.offchip_bw_bytes_per_s = bw;
        spec.pl_buffer_bytes = pl;
        let back: PlatformSpec<f64> = load_platform(&spec.to_document()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

fn toy_limits() -> SearchLimits {
    SearchLimits {
        tiles: Some(vec![TileDims::cube(16), TileDims::cube(32)]),
        max_a: 2,
        max_b: 3,
        max_c: 2,
        max_x: 2,
        max_y: 2,
        max_z: 2,
        ..SearchLimits::default()
    }
}

#[test]
fn more_buffer_or_bandwidth_never_hurts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = MmShape::new(200, 300, 400, DataType::FP32).unwrap();
    for _ in 0..10 {
        let spec = common::toy_platform(&mut rng);
        let base = search(shape, &spec, &toy_limits())
            .ok()
            .map(|r| r.aggregate_ops_per_s);
        let mut roomy = spec.clone();
        roomy.pl_buffer_bytes *= 4;
        let mut fast = spec.clone();
        fast.offchip_bw_bytes_per_s *= 4.0;
        for better in [roomy, fast] {
            let after = search(shape, &better, &toy_limits())
                .ok()
                .map(|r| r.aggregate_ops_per_s);
            match (base, after) {
                (Some(b), Some(a)) => assert!(a >= b),
                (Some(_), None) => panic!("larger resources lost every design"),
                _ => {}
            }
        }
    }
}

#[test]
fn search_is_deterministic_and_feasible() {
    let spec: PlatformSpec<f64> = load_platform(include_str!("../profiles/toy.toml")).unwrap();
    let shape = MmShape::new(64, 64, 64, DataType::FP32).unwrap();
    let a = search(shape, &spec, &toy_limits()).unwrap();
    let b = search(shape, &spec, &toy_limits()).unwrap();
    assert_eq!(a, b);
    assert!(feasible(&a.best, &spec, true).is_empty());
    assert!(common::oracle_feasible(&a.best, &spec, true));
    let all = enumerate(shape, &spec, &toy_limits()).unwrap();
    assert!(all.iter().all(|c| common::oracle_feasible(c, &spec, true)));
}

#[test]
fn unbounded_bandwidth_uses_every_core() {
    let mut spec: PlatformSpec<f64> = load_platform(include_str!("../profiles/toy.toml")).unwrap();
    spec.offchip_bw_bytes_per_s = 1e30;
    let shape = MmShape::new(512, 512, 512, DataType::FP32).unwrap();
    let limits = SearchLimits {
        max_b: 1,
        ..toy_limits()
    };
    let r = search(shape, &spec, &limits).unwrap();
    assert_eq!(r.best.cores(), 4);
}
