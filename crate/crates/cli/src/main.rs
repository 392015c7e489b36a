use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qoe_landscape::asymptotics::staircase;
use qoe_landscape::landscape::{
    curvature_asymmetry, detect_ridges, operating_region, read_csv, scan, write_csv, Axis, GridSpec, Layer, ScanGrid,
    Spacing,
};
use qoe_landscape::qoe::SlaPoint;
use qoe_landscape::report::{
    compare, comparison_table, envelope, layer_rows, validate, write_pgm_heatmap, NamedHistogram, Scaling,
    ValidationConfig, ValidationMode,
};
use qoe_landscape::sensitivity::{diagnose, gradient, hessian, Param};
use qoe_landscape::topology::{
    generate, hop_histogram, k_core, largest_component, load_caida, load_edge_list, moments, write_edge_list, Loaded,
};
use qoe_landscape::{evaluate, CostHistogram, Error, Topology, TopologySpec};

#[derive(Parser)]
#[command(name = "qoe-landscape", version, about = "QoE-imbalance metrics and SLA sensitivity landscapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic topology as an edge list.
    Gen(GenArgs),
    /// Read a CAIDA AS-relationship file, optionally reduce it, write an edge list.
    IngestCaida(IngestArgs),
    /// All-pairs cost histogram and its moments.
    Hist(HistArgs),
    /// Imbalance and average satisfaction at one SLA point.
    Eval(PointArgs),
    /// Gradients, trade-off angle and imbalance Hessian at one SLA point.
    Grad(GradArgs),
    /// Per-class breakdown of one gradient component.
    Diagnose(DiagnoseArgs),
    /// Dense (a, h0) scan written as a grid CSV, with optional heatmaps.
    Scan(ScanArgs),
    /// Operating region, its area share and boundary curvature.
    Region(RegionArgs),
    /// Run a validation suite; exits 1 when a check fails.
    Validate(ValidateArgs),
    /// Side-by-side metrics for several topologies on one window.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Edges,
    Caida,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Complete,
    Path,
    Star,
    Grid,
    Er,
    Ba,
    Ws,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long = "type", value_enum)]
    kind: Kind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    p: Option<f64>,
    /// Edges per new node (ba).
    #[arg(long)]
    m: Option<usize>,
    /// Ring degree (ws).
    #[arg(long)]
    k: Option<usize>,
    /// Rewiring probability (ws).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct IngestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep only the largest connected component.
    #[arg(long)]
    lcc: bool,
    /// Reduce to the k-core (after the component step).
    #[arg(long)]
    k_core: Option<usize>,
}

#[derive(Args, Serialize)]
struct InputArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "edges")]
    format: Format,
}

#[derive(Args, Serialize)]
struct HistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
}

#[derive(Args, Serialize)]
struct SlaArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    h0: f64,
}

#[derive(Args, Serialize)]
struct PointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sla: SlaArgs,
}

#[derive(Args, Serialize)]
struct GradArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sla: SlaArgs,
    /// Finite-difference step for the Hessian; per-parameter default otherwise.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ParamArg {
    A,
    H0,
}

#[derive(Args, Serialize)]
struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sla: SlaArgs,
    #[arg(long, value_enum)]
    param: ParamArg,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SpacingArg {
    Linear,
    Log,
}

/// Scan window; unset values fall back to the default window.
#[derive(Args, Serialize, Default)]
struct WindowArgs {
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    a_steps: Option<usize>,
    #[arg(long, value_enum)]
    a_spacing: Option<SpacingArg>,
    #[arg(long)]
    h0_min: Option<f64>,
    #[arg(long)]
    h0_max: Option<f64>,
    #[arg(long)]
    h0_steps: Option<usize>,
}

impl WindowArgs {
    fn resolve(&self, default: GridSpec) -> Result<GridSpec, Error> {
        let a = default.a_axis;
        let h = default.h0_axis;
        let spacing = match self.a_spacing {
            Some(SpacingArg::Linear) => Spacing::Linear,
            Some(SpacingArg::Log) => Spacing::Log,
            None => a.spacing,
        };
        GridSpec::new(
            Axis {
                min: self.a_min.unwrap_or(a.min),
                max: self.a_max.unwrap_or(a.max),
                steps: self.a_steps.unwrap_or(a.steps),
                spacing,
            },
            Axis::linear(self.h0_min.unwrap_or(h.min), self.h0_max.unwrap_or(h.max), self.h0_steps.unwrap_or(h.steps)),
        )
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScalingArg {
    Minmax,
    Absmax,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Minmax => Scaling::MinMax,
            ScalingArg::Absmax => Scaling::AbsMax,
        }
    }
}

#[derive(Args, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowArgs,
    /// Grid CSV destination.
    #[arg(long)]
    out: PathBuf,
    /// Directory for one PGM heatmap (plus JSON sidecar) per layer.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "minmax")]
    scaling: ScalingArg,
    /// Percentile separating ridge cells from the rest.
    #[arg(long, default_value_t = 90.0)]
    percentile: f64,
    /// Denominator clamp for the curvature ratio.
    #[arg(long, default_value_t = 1e-12)]
    floor: f64,
}

#[derive(Args, Serialize)]
struct RegionArgs {
    /// Grid CSV from `scan`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    grid: Option<PathBuf>,
    /// Topology to scan directly instead of reading a grid.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edges")]
    format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowArgs,
    #[arg(long)]
    i_max: f64,
    #[arg(long)]
    s_min: f64,
    /// Write the region JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    SmallA,
    LargeA,
    Gradient,
    Axioms,
}

#[derive(Args, Serialize)]
struct ValidateArgs {
    /// Topology file; not needed for the axioms suite.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edges")]
    format: Format,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random samples (gradient) or share vectors (axioms, at least 1000).
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Strictness for the large-a suite; it is also checked at twice this.
    #[arg(long, default_value_t = 10.0)]
    a: f64,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    /// Topology files (repeat the flag).
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "edges")]
    format: Format,
    /// Add a Barabási–Albert graph with this many edges per node, sized like the first input.
    #[arg(long)]
    ba_match: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    i_max: f64,
    #[arg(long)]
    s_min: f64,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowArgs,
    /// Write the JSON report here; the text table goes to stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Validation(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn config<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn print_json(doc: &Value) -> io::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, doc)?;
    writeln!(out)
}

fn write_json(path: &Path, doc: &Value) -> io::Result<()> {
    fs::write(path, serde_json::to_string_pretty(doc).expect("serializable") + "\n")
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path, format: Format) -> Result<Loaded, Failure> {
    let reader = open(path)?;
    let loaded = match format {
        Format::Edges => load_edge_list(reader),
        Format::Caida => load_caida(reader),
    };
    loaded.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Loads a topology and reduces it to its largest component when needed.
fn load_connected(path: &Path, format: Format) -> Result<Topology, Failure> {
    let g = load(path, format)?.topology;
    if g.is_connected() {
        return Ok(g);
    }
    let lcc = largest_component(&g)?;
    eprintln!("warning: using largest component (N={})", lcc.node_count());
    Ok(lcc)
}

fn load_histogram(path: &Path, format: Format) -> Result<(Topology, CostHistogram), Failure> {
    let g = load_connected(path, format)?;
    let h = hop_histogram(&g)?;
    Ok((g, h))
}

fn window_json(spec: &GridSpec) -> Value {
    serde_json::to_value(spec).expect("serializable")
}

fn gen_spec(args: &GenArgs) -> Result<TopologySpec, Failure> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--{flag} is required")));
    let needf = |v: Option<f64>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--{flag} is required")));
    Ok(match args.kind {
        Kind::Complete => TopologySpec::Complete { n: need(args.n, "n")? },
        Kind::Path => TopologySpec::Path { n: need(args.n, "n")? },
        Kind::Star => TopologySpec::Star { n: need(args.n, "n")? },
        Kind::Grid => TopologySpec::Grid { rows: need(args.rows, "rows")?, cols: need(args.cols, "cols")? },
        Kind::Er => TopologySpec::Er { n: need(args.n, "n")?, p: needf(args.p, "p")?, seed: args.seed },
        Kind::Ba => TopologySpec::Ba { n: need(args.n, "n")?, m: need(args.m, "m")?, seed: args.seed },
        Kind::Ws => TopologySpec::Ws {
            n: need(args.n, "n")?,
            k: need(args.k, "k")?,
            beta: needf(args.beta, "beta")?,
            seed: args.seed,
        },
    })
}

fn cmd_gen(args: &GenArgs) -> Outcome {
    let g = generate(&gen_spec(args)?)?;
    match &args.out {
        Some(path) => write_edge_list(&g, BufWriter::new(File::create(path)?))?,
        None => write_edge_list(&g, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> Outcome {
    let loaded = load(&args.input, Format::Caida)?;
    let raw = &loaded.topology;
    let mut g = raw.clone();
    let mut lcc_nodes = None;
    if args.lcc {
        g = largest_component(&g)?;
        lcc_nodes = Some(g.node_count());
    }
    if let Some(k) = args.k_core {
        g = k_core(&g, k)?;
    }
    write_edge_list(&g, BufWriter::new(File::create(&args.out)?))?;
    print_json(&envelope(
        "ingest-caida",
        config(args),
        json!({
            "raw_nodes": raw.node_count(),
            "raw_edges": raw.edge_count(),
            "duplicate_edges": loaded.stats.duplicates,
            "self_loops": loaded.stats.self_loops,
            "lcc_nodes": lcc_nodes,
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "connected": g.is_connected(),
        }),
    ))?;
    Ok(())
}

fn cmd_hist(args: &HistArgs) -> Outcome {
    let (g, h) = load_histogram(&args.input.input, args.input.format)?;
    print_json(&envelope(
        "hist",
        config(args),
        json!({
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "pair_total": h.pair_total(),
            "classes": h.classes(),
            "moments": moments(&h),
        }),
    ))?;
    Ok(())
}

fn sla(args: &SlaArgs) -> Result<SlaPoint, Failure> {
    Ok(SlaPoint::new(args.a, args.h0)?)
}

fn cmd_eval(args: &PointArgs) -> Outcome {
    let (_, h) = load_histogram(&args.input.input, args.input.format)?;
    let snap = evaluate(&h, sla(&args.sla)?);
    let profile = staircase(&h);
    let result = json!({
        "imbalance": snap.imbalance,
        "mean_satisfaction": snap.mean_satisfaction,
        "entropy_bits": snap.entropy_bits,
        "total_weight": snap.total_weight,
        "log_total_weight": snap.log_total_weight,
        "pair_total": snap.pair_total,
        "large_a_limit": profile.limit_at(args.sla.h0),
        "classes": snap.classes,
    });
    print_json(&envelope("eval", config(args), result))?;
    Ok(())
}

fn cmd_grad(args: &GradArgs) -> Outcome {
    let (_, h) = load_histogram(&args.input.input, args.input.format)?;
    let point = sla(&args.sla)?;
    let grad = gradient(&h, point);
    let hess = hessian(&h, point, args.step)?;
    print_json(&envelope("grad", config(args), json!({ "gradient": grad, "hessian": hess })))?;
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Outcome {
    let (_, h) = load_histogram(&args.input.input, args.input.format)?;
    let param = match args.param {
        ParamArg::A => Param::A,
        ParamArg::H0 => Param::H0,
    };
    let point = sla(&args.sla)?;
    let rows = diagnose(&h, point, param);
    let total: f64 = rows.iter().map(|r| r.contribution).sum();
    print_json(&envelope(
        "diagnose",
        config(args),
        json!({ "gradient": gradient(&h, point).imbalance(param), "contribution_sum": total, "rows": rows }),
    ))?;
    Ok(())
}

fn summarize(values: &[f64]) -> Value {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "min": min, "max": max })
}

fn cmd_scan(args: &ScanArgs) -> Outcome {
    let (_, h) = load_histogram(&args.input.input, args.input.format)?;
    let spec = args.window.resolve(GridSpec::default_for(&h))?;
    let grid = scan(&h, &spec)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    write_csv(&grid, &mut out)?;
    out.flush()?;

    let mut heatmaps = Vec::new();
    if let Some(dir) = &args.heatmaps {
        fs::create_dir_all(dir)?;
        for layer in Layer::ALL {
            let path = dir.join(format!("{}.pgm", layer.name()));
            let side = write_pgm_heatmap(&layer_rows(&grid, layer), &path, args.scaling.into(), Some(window_json(&spec)))?;
            heatmaps.push(json!({ "layer": layer.name(), "path": path, "constant": side.constant }));
        }
    }
    let ridges = detect_ridges(&grid, args.percentile)?;
    let ratio = curvature_asymmetry(&grid, args.floor)?;
    let ridge_ratios: Vec<f64> = ratio.iter().zip(&ridges.ridge).filter(|(_, &r)| r).map(|(&v, _)| v).collect();
    let (na, nh) = grid.shape();
    let result = json!({
        "window": window_json(&spec),
        "cells": na * nh,
        "csv": args.out,
        "imbalance": summarize(&grid.layer(Layer::Imbalance)),
        "d2I_h0h0": summarize(&grid.layer(Layer::D2iH0h0)),
        "d2I_aa": summarize(&grid.layer(Layer::D2iAa)),
        "ridges": {
            "percentile": args.percentile,
            "ridge_threshold": ridges.ridge_threshold,
            "belt_threshold": ridges.belt_threshold,
            "ridge_cells": ridges.ridge.iter().filter(|&&r| r).count(),
            "belt_cells": ridges.belt.iter().filter(|&&b| b).count(),
            "ridge_curvature_ratio": summarize(&ridge_ratios),
        },
        "heatmaps": heatmaps,
    });
    print_json(&envelope("scan", config(args), result))?;
    Ok(())
}

fn cmd_region(args: &RegionArgs) -> Outcome {
    let grid: ScanGrid = match (&args.grid, &args.input) {
        (Some(path), _) => read_csv(open(path)?)?,
        (None, Some(path)) => {
            let (_, h) = load_histogram(path, args.format)?;
            scan(&h, &args.window.resolve(GridSpec::default_for(&h))?)?
        }
        (None, None) => return Err(Failure::Usage("either --grid or --in is required".into())),
    };
    let region = operating_region(&grid, args.i_max, args.s_min)?;
    let result = json!({
        "i_max": region.i_max,
        "s_min": region.s_min,
        "aor_percent": region.aor_percent,
        "mcr": region.mcr,
        "window": window_json(&grid.spec),
        "boundary_cell_count": region.boundary_cells.len(),
    });
    let doc = envelope("region", config(args), result);
    if let Some(path) = &args.out {
        write_json(path, &doc)?;
    }
    print_json(&doc)?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Outcome {
    let mode = match args.mode {
        ModeArg::SmallA => ValidationMode::SmallA,
        ModeArg::LargeA => ValidationMode::LargeA,
        ModeArg::Gradient => ValidationMode::Gradient,
        ModeArg::Axioms => ValidationMode::Axioms,
    };
    let h = match (&args.input, mode) {
        (Some(path), _) => load_histogram(path, args.format)?.1,
        (None, ValidationMode::Axioms) => CostHistogram::new([(1.0, 1), (2.0, 1)])?,
        (None, _) => return Err(Failure::Usage("--in is required for this mode".into())),
    };
    let cfg = ValidationConfig { seed: args.seed, samples: args.samples, a_large: args.a };
    let report = validate(&h, mode, &cfg)?;
    let doc = envelope("validate", config(args), serde_json::to_value(&report).expect("serializable"));
    if report.passed {
        print_json(&doc)?;
        Ok(())
    } else {
        Err(Failure::Validation(doc))
    }
}

fn cmd_compare(args: &CompareArgs) -> Outcome {
    let mut items = Vec::new();
    for path in &args.inputs {
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let (g, h) = load_histogram(path, args.format).map_err(|e| match e {
            Failure::Usage(msg) => Failure::Usage(format!("{name}: {msg}")),
            other => other,
        })?;
        items.push(NamedHistogram { name, nodes: g.node_count(), histogram: h });
    }
    if let Some(m) = args.ba_match {
        let n = items[0].nodes;
        let spec = TopologySpec::Ba { n, m, seed: args.seed };
        let h = hop_histogram(&generate(&spec)?)?;
        items.push(NamedHistogram { name: spec.name(), nodes: n, histogram: h });
    }
    if items.len() < 2 {
        return Err(Failure::Usage(format!("compare needs at least 2 topologies, got {}", items.len())));
    }
    let default = qoe_landscape::report::shared_window(&items).expect("non-empty");
    let spec = args.window.resolve(default)?;
    let rows = compare(&items, args.i_max, args.s_min, &spec)?;
    print!("{}", comparison_table(&rows));
    if let Some(path) = &args.json {
        let doc = envelope("compare", config(args), json!({ "window": window_json(&spec), "rows": rows }));
        write_json(path, &doc)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::IngestCaida(a) => cmd_ingest(a),
        Command::Hist(a) => cmd_hist(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Grad(a) => cmd_grad(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Region(a) => cmd_region(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(doc)) => {
            let _ = print_json(&doc);
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
