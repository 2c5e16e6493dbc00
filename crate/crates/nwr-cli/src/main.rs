//! `nwr`: reduce, validate and inspect models with never-worse relations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nwr::etr::{encode_not_nwr, EtrError};
use nwr::graph::VertexId;
use nwr::io::{read_model, write_model, write_model_with_source, IoError};
use nwr::mc_equiv::{mc_collapse, mc_equiv_classes};
use nwr::model::WpMdp;
use nwr::oracle::{check_value_preservation, SampleProfile};
use nwr::pipeline::{prepare_input, run_pipeline, MapDocument, PipelineError};
use nwr::reduce::{PruneConfig, ReduceError};
use nwr::report::{write_report, write_reports, IterationPoint, ReductionReport, ReportFormat};
use nwr::solver::{decide, Decision, SolverError, DEFAULT_SOLVER_CMD};

const MAP_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "nwr", version, about = "State-space reduction of parametric MDPs via never-worse relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a model and write the reduced model, its merge map and a report.
    Reduce(ReduceArgs),
    /// Check a reduction by comparing optimal values under sampled valuations.
    Validate(ValidateArgs),
    /// Exact equivalence classes of a single-action model, optionally collapsed.
    McEquiv(McEquivArgs),
    /// Write the SMT-LIB query deciding whether v is never worse than W.
    ExportEtr(ExportEtrArgs),
    /// Reduce every model document in a directory and tabulate the results.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct PruneFlags {
    /// Experimental setup: 1 prunes actions, 2 only collapses.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), default_value_t = 1)]
    setup: u8,
    /// Maximum pruning passes per outer iteration (overrides the setup).
    #[arg(long)]
    inner: Option<usize>,
    /// Maximum outer iterations (overrides the setup).
    #[arg(long)]
    outer: Option<usize>,
    /// Run the pruning loop in the first outer iteration as well.
    #[arg(long)]
    no_skip_first: bool,
    /// Enable the costly membership rule when adding nodes.
    #[arg(long)]
    enable_membership_edges: bool,
}

impl PruneFlags {
    fn config(&self) -> PruneConfig {
        let mut cfg = if self.setup == 2 { PruneConfig::setup2() } else { PruneConfig::setup1() };
        if let Some(i) = self.inner {
            cfg.inner_max = Some(i);
        }
        if let Some(o) = self.outer {
            cfg.outer_max = o;
        }
        if self.no_skip_first {
            cfg.skip_first_outer_inner = false;
        }
        cfg.enable_superset_membership_edges = self.enable_membership_edges;
        cfg
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Uniform,
    Adversarial,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Merge map from the prepared input to the output (default: `<out>.map.json`).
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(flatten)]
    prune: PruneFlags,
}

#[derive(Args)]
struct ValidateArgs {
    /// The original model document.
    #[arg(long = "in")]
    input: PathBuf,
    /// The reduced model written by `reduce`.
    #[arg(long)]
    reduced: PathBuf,
    /// Merge map (default: `<reduced>.map.json`).
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    profile: ProfileArg,
    /// Where to write the JSON validation report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct McEquivArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Collapsed chain.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Partition as JSON (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExportEtrArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// SMT-LIB output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Left vertex: a state name, `state:action`, or `state#choice-index`.
    #[arg(long)]
    v: String,
    /// Right-hand vertices, same syntax as `--v`.
    #[arg(long = "w", required = true, num_args = 1..)]
    w: Vec<String>,
    /// Also write the formula as plain text to this file.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Run the solver and print the verified verdict.
    #[arg(long)]
    solve: bool,
    /// Solver command; `{}` stands for the query file.
    #[arg(long, env = "NWR_SOLVER", default_value = DEFAULT_SOLVER_CMD)]
    solver_cmd: String,
    /// Solver timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of model documents (`*.json`).
    #[arg(long = "in")]
    input: PathBuf,
    /// Table file (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration sizes of every instance as CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Directory for reduced models and merge maps.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    prune: PruneFlags,
}

/// A failure together with the process exit code it maps to.
#[derive(Debug)]
enum Failure {
    /// 1: a reduction changed some value.
    Violation(String),
    /// 2: bad invocation or input outside a command's preconditions.
    Usage(String),
    /// 3: reading or writing files.
    Io(String),
    /// 4: the external solver failed.
    Tool(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Tool(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Violation(m) | Failure::Usage(m) | Failure::Io(m) | Failure::Tool(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Invalid(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ReduceError> for Failure {
    fn from(e: ReduceError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<nwr::report::ReportError> for Failure {
    fn from(e: nwr::report::ReportError) -> Self {
        match e {
            nwr::report::ReportError::NonMonotone { .. } => Failure::Violation(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn default_map_path(model_path: &Path) -> PathBuf {
    let stem = model_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model_path.with_file_name(format!("{stem}.map.json"))
}

fn cmd_reduce(a: &ReduceArgs) -> Result<(), Failure> {
    let m = read_model(&a.input)?;
    let out = run_pipeline(&m, &a.prune.config())?;
    let report = &out.reduction.report;
    report.check_monotone()?;
    write_model_with_source(&out.reduction.model, Some(format!("nwr reduce of {}", m.name)), &a.out)?;
    let map_path = a.map.clone().unwrap_or_else(|| default_map_path(&a.out));
    let doc = MapDocument { version: MAP_VERSION, source: m.name.clone(), map: out.reduction.map.clone() };
    write_json(&doc, Some(&map_path))?;
    if let Some(p) = &a.report {
        write_report(std::slice::from_ref(report), p, a.format.into())?;
    }
    eprintln!(
        "{}: {}/{} -> {}/{} -> {}/{} states/choices",
        report.instance,
        report.original.states,
        report.original.choices,
        report.preprocessed.states,
        report.preprocessed.choices,
        report.reduced.states,
        report.reduced.choices
    );
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let original = read_model(&a.input)?;
    let reduced = read_model(&a.reduced)?;
    let map_path = a.map.clone().unwrap_or_else(|| default_map_path(&a.reduced));
    let text = std::fs::read_to_string(&map_path).map_err(|e| io_err(&map_path, e))?;
    let doc: MapDocument = serde_json::from_str(&text).map_err(|e| io_err(&map_path, e))?;
    let view = prepare_input(&original)?.view;
    if doc.map.state_map.len() != view.num_states() || doc.map.choice_origin.len() != reduced.num_states() {
        return Err(Failure::Usage("merge map does not fit the given models".into()));
    }
    if a.samples == 0 {
        eprintln!("warning: no samples requested; nothing was checked");
        return Ok(());
    }
    let profile = match a.profile {
        ProfileArg::Uniform => SampleProfile::Uniform,
        ProfileArg::Adversarial => SampleProfile::Adversarial,
    };
    let report = check_value_preservation(&view, &reduced, &doc.map, a.samples, a.seed, profile)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(p) = &a.report {
        write_json(&report, Some(p))?;
    }
    if report.ok() {
        eprintln!("{} samples, {} comparisons, no violations", report.samples, report.comparisons);
        Ok(())
    } else {
        let where_ = a.report.as_ref().map(|p| format!("; see {}", p.display())).unwrap_or_default();
        Err(Failure::Violation(format!("{} value mismatches{where_}", report.violations.len())))
    }
}

fn cmd_mc_equiv(a: &McEquivArgs) -> Result<(), Failure> {
    let m = read_model(&a.input)?;
    let m = if m.subclass.is_trivially_parametric() { m } else { m.to_trivially_parametric() };
    let p = mc_equiv_classes(&m).map_err(|e| Failure::Usage(e.to_string()))?;
    for d in &p.diagnostics {
        eprintln!("warning: {d}");
    }
    let named: Vec<Vec<&str>> =
        p.classes.iter().map(|c| c.iter().map(|&s| m.states[s].name.as_str()).collect()).collect();
    let exits: Vec<Option<&str>> = p.exits.iter().map(|e| e.map(|s| m.states[s].name.as_str())).collect();
    write_json(
        &serde_json::json!({ "classes": named, "exits": exits, "diagnostics": p.diagnostics }),
        a.report.as_deref(),
    )?;
    if let Some(out) = &a.out {
        let (collapsed, _) = mc_collapse(&m, &p);
        write_model(&collapsed, out)?;
    }
    Ok(())
}

/// Resolves `name`, `name:action` or `name#index` to a vertex of `m`.
fn parse_vertex(m: &WpMdp, text: &str) -> Result<VertexId, Failure> {
    if let Some(s) = m.state_index(text) {
        return Ok(VertexId::State(s));
    }
    let unknown = || Failure::Usage(format!("unknown vertex `{text}`"));
    if let Some((state, idx)) = text.rsplit_once('#') {
        let s = m.state_index(state).ok_or_else(unknown)?;
        let c: usize = idx.parse().map_err(|_| unknown())?;
        if c < m.states[s].choices.len() {
            return Ok(VertexId::Nature(s, c));
        }
    }
    if let Some((state, action)) = text.rsplit_once(':') {
        let s = m.state_index(state).ok_or_else(unknown)?;
        let hits: Vec<usize> =
            (0..m.states[s].choices.len()).filter(|&c| m.states[s].choices[c].action == action).collect();
        match hits.as_slice() {
            [c] => return Ok(VertexId::Nature(s, *c)),
            [] => {}
            _ => return Err(Failure::Usage(format!("`{text}` is ambiguous; use `{state}#<index>`"))),
        }
    }
    Err(unknown())
}

fn cmd_export_etr(a: &ExportEtrArgs) -> Result<(), Failure> {
    let m = read_model(&a.input)?;
    let v = parse_vertex(&m, &a.v)?;
    let w: Vec<VertexId> = a.w.iter().map(|x| parse_vertex(&m, x)).collect::<Result<_, _>>()?;
    let q = encode_not_nwr(&m, v, &w).map_err(|e: EtrError| Failure::Usage(e.to_string()))?;
    let smt = q.to_smtlib();
    match &a.out {
        Some(p) => std::fs::write(p, &smt).map_err(|e| io_err(p, e))?,
        None if !a.solve => print!("{smt}"),
        None => {}
    }
    if let Some(p) = &a.text {
        std::fs::write(p, q.to_text()).map_err(|e| io_err(p, e))?;
    }
    if !a.solve {
        return Ok(());
    }
    let timeout = Duration::from_secs_f64(a.timeout.max(0.0));
    let decision = decide(&q, &a.solver_cmd, timeout).map_err(|e: SolverError| Failure::Tool(e.to_string()))?;
    write_json(&decision, None)?;
    match decision {
        Decision::NeverWorse | Decision::Counterexample { .. } => Ok(()),
        Decision::Unverified { reason } => Err(Failure::Tool(format!("solver witness rejected: {reason}"))),
        Decision::Unknown { reason } => Err(Failure::Tool(format!("no verdict: {reason}"))),
    }
}

fn curves_csv(reports: &[ReductionReport], path: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let err = |e: csv::Error| io_err(path, e);
    w.write_record(["instance", "outer_iteration", "inner_passes", "pruned", "merged", "states", "choices"])
        .map_err(err)?;
    for r in reports {
        for IterationPoint { outer_iteration, inner_passes, pruned, merged, states, choices } in &r.curve {
            let row = [outer_iteration, inner_passes, pruned, merged, states, choices].map(|x| x.to_string());
            w.write_record(std::iter::once(r.instance.clone()).chain(row)).map_err(err)?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn bench_one(path: &Path, cfg: &PruneConfig, out_dir: Option<&Path>) -> Result<ReductionReport, Failure> {
    let m = read_model(path)?;
    let out = run_pipeline(&m, cfg)?;
    out.reduction.report.check_monotone()?;
    if let Some(dir) = out_dir {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let model_path = dir.join(format!("{stem}.reduced.json"));
        write_model(&out.reduction.model, &model_path)?;
        let doc = MapDocument { version: MAP_VERSION, source: m.name.clone(), map: out.reduction.map };
        write_json(&doc, Some(&default_map_path(&model_path)))?;
    }
    Ok(out.reduction.report)
}

fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let entries = std::fs::read_dir(&a.input).map_err(|e| io_err(&a.input, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".map.json"))
        .collect();
    files.sort();
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let cfg = a.prune.config();
    let results: Mutex<Vec<Option<Result<ReductionReport, Failure>>>> =
        Mutex::new((0..files.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..a.jobs.max(1).min(files.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = files.get(i) else { break };
                let r = bench_one(path, &cfg, a.out.as_deref());
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut reports = Vec::new();
    let mut first_failure: Option<Failure> = None;
    for (path, r) in files.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every instance is processed") {
            Ok(rep) => reports.push(rep),
            Err(f) => {
                eprintln!("{}: {}", path.display(), f.message());
                first_failure.get_or_insert(f);
            }
        }
    }
    match &a.report {
        Some(p) => write_report(&reports, p, a.format.into())?,
        None => write_reports(&reports, std::io::stdout().lock(), a.format.into())?,
    }
    if let Some(p) = &a.curves {
        curves_csv(&reports, p)?;
    }
    match first_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Validate(a) => cmd_validate(a),
        Command::McEquiv(a) => cmd_mc_equiv(a),
        Command::ExportEtr(a) => cmd_export_etr(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
