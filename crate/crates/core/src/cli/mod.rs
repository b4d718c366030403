//! Command-line front end.
//!
//! Inputs are TOML documents (platform and workload); every machine-readable
//! output is pretty-printed JSON, and the simulator timeline is CSV.
//! Exit codes: 0 success, 2 usage or parse error, 3 infeasible, 4 internal.

pub mod export;
pub mod report;
pub mod workload;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dse::{evaluate_model, feasible, search_model, SearchLimits};
use crate::error::{Error, Result};
use crate::interconnect::{congestion, port_plan};
use crate::mapping::{derived_metrics, ArrayDims, BatchDims, MappingConfig, TileDims};
use crate::pipesim::{simulate_column, timeline_events, write_timeline_csv, ColumnSimParams};
use crate::platform::{
    load_platform, peak_throughput, required_ctc, PlatformSpec, VCK190_DOCUMENT,
};
use crate::schedule::{lex_order, zigzag_order};
use export::ScheduleExport;
use report::{
    ColumnSummary, DseReport, Provenance, RooflineReport, RooflineRow, RunReport, SimulateReport,
};
use workload::{load_workload, WorkloadSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Name accepted by `--platform` for the built-in reference profile when no
/// file of that name exists.
pub const BUILTIN_PLATFORM: &str = "vck190";

#[derive(Debug, Parser)]
#[command(
    name = "mmdse",
    version,
    about = "Matrix-multiply mapping and design-space exploration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metrics, ports, congestion and timing of one explicit mapping.
    Analyze(AnalyzeArgs),
    /// Simulate one column of cores under a transfer order.
    Simulate(SimulateArgs),
    /// Search for the best mapping of a workload.
    Dse(DseArgs),
    /// Peak throughput and required CTC per data type.
    Roofline(RooflineArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub platform: PathBuf,
    #[arg(long)]
    pub workload: PathBuf,
    #[arg(long)]
    pub ti: u64,
    #[arg(long)]
    pub tj: u64,
    #[arg(long)]
    pub tk: u64,
    #[arg(long)]
    pub a: u64,
    #[arg(long)]
    pub b: u64,
    #[arg(long)]
    pub c: u64,
    #[arg(long, default_value_t = 1)]
    pub x: u64,
    #[arg(long, default_value_t = 1)]
    pub y: u64,
    #[arg(long, default_value_t = 1)]
    pub z: u64,
    #[arg(long, default_value_t = 1)]
    pub bf_lhs: u64,
    #[arg(long, default_value_t = 1)]
    pub bf_rhs: u64,
    /// Cap tiles at the core's own memory instead of its neighbourhood.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub strict_memory: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderKind {
    Lex,
    Zigzag,
}

impl OrderKind {
    fn name(self) -> &'static str {
        match self {
            OrderKind::Lex => "lex",
            OrderKind::Zigzag => "zigzag",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub order: OrderKind,
    #[arg(long)]
    pub depth: u64,
    #[arg(long)]
    pub batches: u64,
    #[arg(long)]
    pub ctc: u64,
    #[arg(long, default_value_t = 2)]
    pub banks: u64,
    /// Write the CSV timeline here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    #[arg(long)]
    pub platform: PathBuf,
    #[arg(long)]
    pub workload: PathBuf,
    /// Directory receiving `report.json` and `schedule.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub strict_memory: bool,
    /// Explicit tile, as TIxTJxTK; repeat for several.
    #[arg(long = "tile", value_parser = parse_tile)]
    pub tiles: Vec<TileDims>,
    #[arg(long)]
    pub max_tile_dim: Option<u64>,
    #[arg(long)]
    pub max_a: Option<u64>,
    #[arg(long)]
    pub max_b: Option<u64>,
    #[arg(long)]
    pub max_c: Option<u64>,
    #[arg(long)]
    pub max_x: Option<u64>,
    #[arg(long)]
    pub max_y: Option<u64>,
    #[arg(long)]
    pub max_z: Option<u64>,
    #[arg(long)]
    pub max_candidates: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RooflineArgs {
    #[arg(long)]
    pub platform: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_tile(s: &str) -> std::result::Result<TileDims, String> {
    let parts: Vec<&str> = s.split('x').collect();
    let dims: std::result::Result<Vec<u64>, _> =
        parts.iter().map(|p| p.trim().parse::<u64>()).collect();
    match dims.as_deref() {
        Ok([ti, tj, tk]) => Ok(TileDims::new(*ti, *tj, *tk)),
        _ => Err(format!("expected TIxTJxTK, got `{s}`")),
    }
}

impl DseArgs {
    pub fn limits(&self) -> SearchLimits {
        let d = SearchLimits::default();
        SearchLimits {
            tiles: (!self.tiles.is_empty()).then(|| self.tiles.clone()),
            max_tile_dim: self.max_tile_dim.unwrap_or(d.max_tile_dim),
            max_a: self.max_a.unwrap_or(d.max_a),
            max_b: self.max_b.unwrap_or(d.max_b),
            max_c: self.max_c.unwrap_or(d.max_c),
            max_x: self.max_x.unwrap_or(d.max_x),
            max_y: self.max_y.unwrap_or(d.max_y),
            max_z: self.max_z.unwrap_or(d.max_z),
            strict_memory: self.strict_memory,
            max_candidates: self.max_candidates,
            top_k: self.top_k,
        }
    }
}

/// A loaded input document and the bytes it came from.
struct Loaded<T> {
    value: T,
    bytes: Vec<u8>,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_platform_file(path: &Path) -> Result<Loaded<PlatformSpec<f64>>> {
    let bytes = if !path.exists() && path.as_os_str() == BUILTIN_PLATFORM {
        VCK190_DOCUMENT.as_bytes().to_vec()
    } else {
        read_input(path)?
    };
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::PlatformParse(format!("{} is not UTF-8", path.display())))?;
    Ok(Loaded {
        value: load_platform(&text)?,
        bytes,
    })
}

fn load_workload_file(path: &Path) -> Result<Loaded<WorkloadSpec>> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Workload(format!("{} is not UTF-8", path.display())))?;
    Ok(Loaded {
        value: load_workload(&text)?,
        bytes,
    })
}

fn platform_name(spec: &PlatformSpec<f64>) -> String {
    if spec.name.is_empty() {
        format!("{}x{} array", spec.rows, spec.cols)
    } else {
        spec.name.clone()
    }
}

pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<RunReport<f64>> {
    let platform = load_platform_file(&args.platform)?;
    let workload = load_workload_file(&args.workload)?;
    let spec = &platform.value;
    let shapes = workload.value.shapes()?;
    let cfg = MappingConfig {
        shape: shapes[0],
        tile: TileDims::new(args.ti, args.tj, args.tk),
        array: ArrayDims::new(args.a, args.b, args.c),
        batch: BatchDims::new(args.x, args.y, args.z),
        bf_lhs: args.bf_lhs,
        bf_rhs: args.bf_rhs,
    };
    let violations = feasible(&cfg, spec, args.strict_memory);
    let structural = cfg.validate(spec).is_ok();
    let (metrics, ports, cong, layers, aggregate, column) = if structural {
        let eval = evaluate_model(&shapes, &cfg, spec)?;
        let params = ColumnSimParams::from_config(&cfg, spec)?;
        let col = simulate_column(&zigzag_order(params.num_batches, params.depth), &params)?;
        (
            Some(derived_metrics(&cfg, spec)?),
            Some(port_plan(&cfg, spec)?),
            Some(congestion(&cfg, spec, None)?),
            eval.layers,
            Some(eval.aggregate_ops_per_s),
            Some(ColumnSummary::from(&col)),
        )
    } else {
        (None, None, None, Vec::new(), None, None)
    };
    Ok(RunReport {
        provenance: Provenance::new(Some(&platform.bytes), Some(&workload.bytes)),
        platform: platform_name(spec),
        workload: workload.value,
        config: cfg,
        strict_memory: args.strict_memory,
        feasible: violations.is_empty(),
        violations,
        metrics,
        ports,
        congestion: cong,
        layers,
        aggregate_ops_per_s: aggregate,
        column,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(SimulateReport, String)> {
    let order = match args.order {
        OrderKind::Lex => lex_order(args.batches, args.depth),
        OrderKind::Zigzag => zigzag_order(args.batches, args.depth),
    };
    let params = ColumnSimParams::new(args.depth, args.batches, args.ctc).with_banks(args.banks);
    let r = simulate_column(&order, &params)?;
    let mut csv = Vec::new();
    write_timeline_csv(&timeline_events(&r), &mut csv)?;
    let csv = String::from_utf8(csv).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((SimulateReport::new(args.order.name(), &r), csv))
}

/// The report and, when a design was found, its schedule export.
pub fn cmd_dse(args: &DseArgs) -> Result<(DseReport<f64>, Option<ScheduleExport>)> {
    let platform = load_platform_file(&args.platform)?;
    let workload = load_workload_file(&args.workload)?;
    let spec = &platform.value;
    let limits = args.limits();
    let shapes = workload.value.shapes()?;
    let mut report = DseReport {
        provenance: Provenance::new(Some(&platform.bytes), Some(&workload.bytes)),
        platform: platform_name(spec),
        workload: workload.value.clone(),
        limits: limits.clone(),
        result: None,
        nearest: None,
        violations: Vec::new(),
    };
    match search_model(&shapes, spec, &limits) {
        Ok(r) => {
            let export = ScheduleExport::build(&r.best, spec)?;
            report.result = Some(r);
            Ok((report, Some(export)))
        }
        Err(Error::NoFeasible {
            nearest,
            violations,
        }) => {
            report.nearest = nearest.map(|b| *b);
            report.violations = violations;
            Ok((report, None))
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_roofline(args: &RooflineArgs) -> Result<RooflineReport<f64>> {
    let platform = load_platform_file(&args.platform)?;
    let spec = &platform.value;
    let mut rows = Vec::new();
    for dt in &spec.dtypes {
        let peak = peak_throughput(spec, dt, spec.cores())?;
        rows.push(RooflineRow {
            dtype: dt.name,
            cores: spec.cores(),
            peak_ops_per_s: peak,
            offchip_bw_bytes_per_s: spec.offchip_bw_bytes_per_s,
            required_ctc: required_ctc(peak, spec.offchip_bw_bytes_per_s)?,
        });
    }
    Ok(RooflineReport {
        provenance: Provenance::new(Some(&platform.bytes), None),
        platform: platform_name(spec),
        rows,
    })
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoFeasible { .. } => EXIT_INFEASIBLE,
        Error::SimMismatch(_) | Error::Deadlock { .. } | Error::Json(_) | Error::Io(_) => {
            EXIT_INTERNAL
        }
        _ => EXIT_USAGE,
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Analyze(a) => {
            let r = cmd_analyze(a)?;
            print!("{}", r.render_text());
            if let Some(p) = &a.out {
                write_output(p, &to_json(&r)?)?;
            }
            if r.feasible {
                Ok(EXIT_OK)
            } else {
                eprintln!(
                    "infeasible: {}",
                    crate::dse::describe_violations(&r.violations)
                );
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::Simulate(a) => {
            let (r, csv) = cmd_simulate(a)?;
            print!("{}", r.render_text());
            if let Some(p) = &a.out {
                write_output(p, &csv)?;
            }
            if let Some(p) = &a.report {
                write_output(p, &to_json(&r)?)?;
            }
            Ok(EXIT_OK)
        }
        Command::Dse(a) => {
            let (r, export) = cmd_dse(a)?;
            print!("{}", r.render_text());
            if let Some(dir) = &a.out {
                write_output(&dir.join("report.json"), &to_json(&r)?)?;
                if let Some(e) = &export {
                    write_output(&dir.join("schedule.json"), &e.to_json()?)?;
                }
            }
            if r.result.is_some() {
                Ok(EXIT_OK)
            } else {
                eprintln!("no feasible mapping");
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::Roofline(a) => {
            let r = cmd_roofline(a)?;
            print!("{}", r.render_text());
            if let Some(p) = &a.out {
                write_output(p, &to_json(&r)?)?;
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
