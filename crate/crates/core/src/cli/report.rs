//! Structured reports. The text summaries are rendered from the same
//! structs that are serialized, so both always agree.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::workload::WorkloadSpec;
use crate::dse::{describe_violations, DseResult, LayerTiming, SearchLimits, Violation};
use crate::interconnect::{CongestionReport, PortPlan};
use crate::mapping::{DerivedMetrics, MappingConfig};
use crate::pipesim::{ColumnReport, ColumnSimParams, DesignTiming, TransferBubble};
use crate::platform::DataType;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub platform_sha256: Option<String>,
    pub workload_sha256: Option<String>,
}

impl Provenance {
    pub fn new(platform: Option<&[u8]>, workload: Option<&[u8]>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            platform_sha256: platform.map(sha256_hex),
            workload_sha256: workload.map(sha256_hex),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Zigzag simulation of one column of the analyzed design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub params: ColumnSimParams,
    pub makespan_steps: u64,
    pub transfer_bubbles: u64,
    pub compute_bubbles: u64,
}

impl From<&ColumnReport> for ColumnSummary {
    fn from(r: &ColumnReport) -> Self {
        Self {
            params: r.params,
            makespan_steps: r.makespan_steps,
            transfer_bubbles: r.transfer_bubbles,
            compute_bubbles: r.compute_bubbles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RunReport<T> {
    pub provenance: Provenance,
    pub platform: String,
    pub workload: WorkloadSpec,
    pub config: MappingConfig,
    pub strict_memory: bool,
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub metrics: Option<DerivedMetrics<T>>,
    pub ports: Option<PortPlan>,
    pub congestion: Option<CongestionReport>,
    pub layers: Vec<LayerTiming<T>>,
    pub aggregate_ops_per_s: Option<T>,
    pub column: Option<ColumnSummary>,
}

fn push_metrics<T: Scalar>(out: &mut String, m: &DerivedMetrics<T>) {
    let _ = writeln!(out, "cores               {}", m.cores);
    let _ = writeln!(out, "compute cycles      {}", m.compute_cycles);
    let _ = writeln!(out, "transfer cycles     {}", m.transfer_cycles);
    let _ = writeln!(out, "core ctc            {}", m.ctc);
    let _ = writeln!(out, "core local bytes    {}", m.core_local_bytes);
    let _ = writeln!(out, "pl buffer bytes     {}", m.pl_buffer_bytes_used);
    let _ = writeln!(out, "on-chip ctc         {}", m.onchip_ctc);
}

fn push_ports(out: &mut String, p: &PortPlan) {
    let _ = writeln!(
        out,
        "ports               packet factor {}, lhs {}, rhs {}, out {} ({})",
        p.packet_factor,
        p.lhs_in_ports,
        p.rhs_in_ports,
        p.out_ports,
        if p.feasible {
            "fits"
        } else {
            "exceeds channels"
        }
    );
}

fn push_congestion(out: &mut String, c: &CongestionReport) {
    let _ = writeln!(
        out,
        "congestion          {} segments, max {} per boundary ({})",
        c.horizontal_segments,
        c.max_segments_per_boundary,
        if c.feasible {
            "fits"
        } else {
            "exceeds switch ports"
        }
    );
}

fn push_timing<T: Scalar>(out: &mut String, name: &str, t: &DesignTiming<T>) {
    let _ = writeln!(
        out,
        "layer {name:<13} {} ops/s, {} s over {} phases, bound {:?}",
        t.predicted_ops_per_s, t.total_s, t.phases, t.bound
    );
}

impl<T: Scalar> RunReport<T> {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "platform            {}", self.platform);
        let _ = writeln!(out, "workload            {}", self.workload.name);
        let _ = writeln!(out, "config              {}", self.config);
        if self.feasible {
            let _ = writeln!(out, "feasible            yes");
        } else {
            let _ = writeln!(
                out,
                "feasible            no: {}",
                describe_violations(&self.violations)
            );
        }
        if let Some(m) = &self.metrics {
            push_metrics(&mut out, m);
        }
        if let Some(p) = &self.ports {
            push_ports(&mut out, p);
        }
        if let Some(c) = &self.congestion {
            push_congestion(&mut out, c);
        }
        for (layer, t) in self.workload.layers.iter().zip(&self.layers) {
            push_timing(&mut out, &layer.name, &t.timing);
        }
        if let Some(a) = self.aggregate_ops_per_s {
            let _ = writeln!(out, "aggregate           {a} ops/s");
        }
        if let Some(c) = &self.column {
            let _ = writeln!(
                out,
                "column (zigzag)     {} steps, {} transfer bubbles, {} compute bubbles",
                c.makespan_steps, c.transfer_bubbles, c.compute_bubbles
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub order: String,
    pub params: ColumnSimParams,
    pub makespan_steps: u64,
    pub transfer_bubbles: u64,
    pub compute_bubbles: u64,
    pub first_transfer_bubble: Option<TransferBubble>,
}

impl SimulateReport {
    pub fn new(order: &str, r: &ColumnReport) -> Self {
        Self {
            order: order.into(),
            params: r.params,
            makespan_steps: r.makespan_steps,
            transfer_bubbles: r.transfer_bubbles,
            compute_bubbles: r.compute_bubbles,
            first_transfer_bubble: r.first_transfer_bubble().copied(),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let _ = writeln!(
            out,
            "{} order, depth {}, {} batches, ctc {}, {} banks",
            self.order, p.depth, p.num_batches, p.ctc_steps, p.banks_per_core
        );
        let _ = writeln!(out, "makespan            {} steps", self.makespan_steps);
        let _ = writeln!(out, "transfer bubbles    {}", self.transfer_bubbles);
        let _ = writeln!(out, "compute bubbles     {}", self.compute_bubbles);
        if let Some(b) = &self.first_transfer_bubble {
            let _ = writeln!(
                out,
                "first transfer bubble at step {} targeting core {} (tile {}, {} steps)",
                b.start_step,
                b.tile.id,
                b.tile,
                b.len()
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RooflineRow<T> {
    pub dtype: DataType,
    pub cores: u64,
    pub peak_ops_per_s: T,
    pub offchip_bw_bytes_per_s: T,
    pub required_ctc: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RooflineReport<T> {
    pub provenance: Provenance,
    pub platform: String,
    pub rows: Vec<RooflineRow<T>>,
}

impl<T: Scalar> RooflineReport<T> {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6} {:>6} {:>22} {:>16} {:>14}",
            "dtype", "cores", "peak ops/s", "bw B/s", "required ctc"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} {:>6} {:>22} {:>16} {:>14}",
                r.dtype.to_string(),
                r.cores,
                r.peak_ops_per_s,
                r.offchip_bw_bytes_per_s,
                r.required_ctc
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DseReport<T> {
    pub provenance: Provenance,
    pub platform: String,
    pub workload: WorkloadSpec,
    pub limits: SearchLimits,
    pub result: Option<DseResult<T>>,
    /// Set when nothing was feasible: the closest candidate and what it breaks.
    pub nearest: Option<MappingConfig>,
    pub violations: Vec<Violation>,
}

impl<T: Scalar> DseReport<T> {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "platform            {}", self.platform);
        let _ = writeln!(out, "workload            {}", self.workload.name);
        let Some(r) = &self.result else {
            let _ = writeln!(out, "no feasible mapping");
            if let Some(n) = &self.nearest {
                let _ = writeln!(out, "nearest             {n}");
            }
            let _ = writeln!(
                out,
                "violations          {}",
                describe_violations(&self.violations)
            );
            return out;
        };
        let _ = writeln!(
            out,
            "candidates          {}{}",
            r.candidates_evaluated,
            if r.truncated { " (budget hit)" } else { "" }
        );
        let _ = writeln!(out, "best                {}", r.best);
        push_metrics(&mut out, &r.metrics);
        push_ports(&mut out, &r.ports);
        push_congestion(&mut out, &r.congestion);
        for (layer, t) in self.workload.layers.iter().zip(&r.layers) {
            push_timing(&mut out, &layer.name, &t.timing);
        }
        let _ = writeln!(out, "aggregate           {} ops/s", r.aggregate_ops_per_s);
        for (i, d) in r.ranked_alternatives.iter().enumerate() {
            let _ = writeln!(
                out,
                "#{:<3} {} ops/s  {}",
                i + 1,
                d.predicted_ops_per_s,
                d.config
            );
        }
        out
    }
}
