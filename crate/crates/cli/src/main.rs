//! Command-line harness for the interval branch-and-bound solver:
//! configure a run (flags or a JSON config file), solve with or without
//! separator decomposition, emit text or JSON reports, and dump the
//! box trace as CSV.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 node budget
//! exhausted (a partial report is still printed), 3 trace I/O failure.

use clap::Parser;
use sepbnb_core::{
    make, solve, BenchmarkId, Exploration, Interval, IntervalVector, ObjectiveProgram, Rounding,
    SolveReport, SolverConfig, SolverError, TraceRecord,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_TRACE_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sepbnb",
    about = "Deterministic global minimization by interval branch and bound with separator decomposition",
    disable_help_flag = false
)]
struct Cli {
    /// Benchmark id: styblinski_tang, exponential, recursive_exponential, shubert, salomon
    #[arg(long)]
    function: Option<String>,

    /// Problem dimension
    #[arg(long)]
    dim: Option<usize>,

    /// Domain override: `lo:hi` (broadcast) or `lo:hi,lo:hi,...` per dimension
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,

    /// Enable the separator decomposition step: on|off
    #[arg(long)]
    separation: Option<String>,

    /// Separator labels: `all` or a comma-separated list (e.g. s0,s1)
    #[arg(long)]
    separators: Option<String>,

    /// Run both with and without separation and report both node counts
    #[arg(long)]
    compare: bool,

    /// Smallest box width that is still split (default: 1e-4 of the initial width)
    #[arg(long = "min-width", allow_hyphen_values = true)]
    min_width: Option<f64>,

    /// Target gap between incumbent and lower bound (default 1e-6)
    #[arg(long = "f-tol", allow_hyphen_values = true)]
    f_tol: Option<f64>,

    /// Budget on generated boxes (default 1e7)
    #[arg(long = "max-nodes")]
    max_nodes: Option<u64>,

    /// Queue workers; 1 is deterministic (default 1)
    #[arg(long)]
    workers: Option<usize>,

    /// Report format: text|json
    #[arg(long)]
    output: Option<String>,

    /// Write the box trace as CSV to this file (in compare mode: the
    /// with-separation run)
    #[arg(long)]
    trace: Option<PathBuf>,

    /// JSON file with a RunConfig; explicit flags override its fields
    #[arg(long = "seed-config")]
    seed_config: Option<PathBuf>,

    /// Queue discipline: best-first|depth-first
    #[arg(long)]
    exploration: Option<String>,

    /// Outward endpoint rounding: on|off
    #[arg(long)]
    rounding: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum SeparatorSelection {
    All(String),
    Labels(Vec<String>),
}

impl Default for SeparatorSelection {
    fn default() -> Self {
        SeparatorSelection::All("all".to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum OutputFormat {
    #[default]
    Text,
    Json,
}

/// One fully described run; `--seed-config` files hold exactly this
/// shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    function: String,
    dim: usize,
    #[serde(default)]
    domain: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_separation")]
    separation: bool,
    #[serde(default)]
    separators: SeparatorSelection,
    #[serde(default)]
    min_width: Option<f64>,
    #[serde(default)]
    f_tolerance: Option<f64>,
    #[serde(default)]
    max_nodes: Option<u64>,
    #[serde(default)]
    exploration: Exploration,
    #[serde(default)]
    rounding: Rounding,
    #[serde(default = "default_workers")]
    workers: usize,
    #[serde(default)]
    output: OutputFormat,
    #[serde(default)]
    trace_path: Option<PathBuf>,
}

fn default_separation() -> bool {
    true
}

fn default_workers() -> usize {
    1
}

struct UsageError(String);

impl From<String> for UsageError {
    fn from(msg: String) -> Self {
        UsageError(msg)
    }
}

fn parse_on_off(field: &str, value: &str) -> Result<bool, UsageError> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("--{field}: expected on|off, got {other:?}").into()),
    }
}

fn parse_domain(dim: usize, spec: &str) -> Result<Vec<(f64, f64)>, UsageError> {
    let parse_range = |part: &str| -> Result<(f64, f64), UsageError> {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| format!("--domain: expected lo:hi, got {part:?}"))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|e| format!("--domain: bad lower bound {lo:?}: {e}"))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|e| format!("--domain: bad upper bound {hi:?}: {e}"))?;
        Ok((lo, hi))
    };
    let parts: Vec<&str> = spec.split(',').collect();
    let ranges: Vec<(f64, f64)> = parts
        .iter()
        .map(|p| parse_range(p))
        .collect::<Result<_, _>>()?;
    broadcast_domain(dim, ranges)
}

fn broadcast_domain(dim: usize, ranges: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>, UsageError> {
    if ranges.len() == 1 {
        return Ok(vec![ranges[0]; dim]);
    }
    if ranges.len() != dim {
        return Err(format!("--domain: got {} ranges for dimension {dim}", ranges.len()).into());
    }
    Ok(ranges)
}

/// Merge CLI flags over the seed config (or defaults).
fn resolve_config(cli: &Cli) -> Result<RunConfig, UsageError> {
    let mut cfg: RunConfig = match &cli.seed_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("--seed-config: cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("--seed-config: invalid config: {e}"))?
        }
        None => RunConfig {
            function: String::new(),
            dim: 0,
            domain: None,
            separation: true,
            separators: SeparatorSelection::default(),
            min_width: None,
            f_tolerance: None,
            max_nodes: None,
            exploration: Exploration::default(),
            rounding: Rounding::default(),
            workers: 1,
            output: OutputFormat::default(),
            trace_path: None,
        },
    };

    if let Some(f) = &cli.function {
        cfg.function = f.clone();
    }
    if let Some(d) = cli.dim {
        cfg.dim = d;
    }
    if cfg.function.is_empty() {
        return Err("--function is required (valid: styblinski_tang, exponential, recursive_exponential, shubert, salomon)"
            .to_string()
            .into());
    }
    if cfg.dim == 0 {
        return Err("--dim is required and must be at least 1"
            .to_string()
            .into());
    }
    if let Some(spec) = &cli.domain {
        cfg.domain = Some(parse_domain(cfg.dim, spec)?);
    } else if let Some(ranges) = cfg.domain.take() {
        cfg.domain = Some(broadcast_domain(cfg.dim, ranges)?);
    }
    if let Some(s) = &cli.separation {
        cfg.separation = parse_on_off("separation", s)?;
    }
    if let Some(s) = &cli.separators {
        cfg.separators = if s == "all" {
            SeparatorSelection::default()
        } else {
            SeparatorSelection::Labels(s.split(',').map(|l| l.trim().to_string()).collect())
        };
    }
    if let Some(v) = cli.min_width {
        cfg.min_width = Some(v);
    }
    if let Some(v) = cli.f_tol {
        cfg.f_tolerance = Some(v);
    }
    if let Some(v) = cli.max_nodes {
        cfg.max_nodes = Some(v);
    }
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    if let Some(o) = &cli.output {
        cfg.output = match o.as_str() {
            "text" => OutputFormat::Text,
            "json" => OutputFormat::Json,
            other => return Err(format!("--output: expected text|json, got {other:?}").into()),
        };
    }
    if let Some(t) = &cli.trace {
        cfg.trace_path = Some(t.clone());
    }
    if let Some(e) = &cli.exploration {
        cfg.exploration = match e.as_str() {
            "best-first" => Exploration::BestFirstLowerBound,
            "depth-first" => Exploration::DepthFirst,
            other => {
                return Err(format!(
                    "--exploration: expected best-first|depth-first, got {other:?}"
                )
                .into())
            }
        };
    }
    if let Some(r) = &cli.rounding {
        cfg.rounding = if parse_on_off("rounding", r)? {
            Rounding::Outward
        } else {
            Rounding::Exact
        };
    }
    Ok(cfg)
}

struct Prepared {
    program: ObjectiveProgram,
    domain: IntervalVector,
    labels: Vec<String>,
    solver: SolverConfig,
    output: OutputFormat,
    trace_path: Option<PathBuf>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, UsageError> {
    let id: BenchmarkId = cfg
        .function
        .parse()
        .map_err(|e| format!("--function: {e}"))?;
    let program = make(id, cfg.dim).map_err(|e| format!("--dim: {e}"))?;

    let domain: IntervalVector = match &cfg.domain {
        None => program.default_box().clone(),
        Some(ranges) => ranges
            .iter()
            .map(|&(lo, hi)| {
                Interval::new(lo, hi)
                    .map_err(|e| UsageError(format!("--domain: invalid range: {e}")))
            })
            .collect::<Result<_, _>>()?,
    };

    let labels: Vec<String> = match &cfg.separators {
        SeparatorSelection::All(word) => {
            if word != "all" {
                return Err(
                    format!("--separators: expected `all` or a label list, got {word:?}").into(),
                );
            }
            program
                .separator_marks()
                .iter()
                .map(|m| m.label.clone())
                .collect()
        }
        SeparatorSelection::Labels(list) => {
            let known: Vec<&str> = program
                .separator_marks()
                .iter()
                .map(|m| m.label.as_str())
                .collect();
            for l in list {
                if !known.contains(&l.as_str()) {
                    return Err(format!(
                        "--separators: unknown label {l:?} (marked: {})",
                        known.join(", ")
                    )
                    .into());
                }
            }
            list.clone()
        }
    };

    let mut solver = SolverConfig::defaults_for(&domain);
    if let Some(v) = cfg.min_width {
        solver.min_width = v;
    }
    if let Some(v) = cfg.f_tolerance {
        solver.f_tolerance = v;
    }
    if let Some(v) = cfg.max_nodes {
        solver.max_nodes = v;
    }
    solver.separation = cfg.separation;
    solver.exploration = cfg.exploration;
    solver.rounding = cfg.rounding;
    solver.workers = cfg.workers;
    solver.record_trace = cfg.trace_path.is_some();

    if solver.min_width.is_nan() || solver.min_width <= 0.0 {
        return Err("--min-width must be positive".to_string().into());
    }
    if solver.f_tolerance.is_nan() || solver.f_tolerance <= 0.0 {
        return Err("--f-tol must be positive".to_string().into());
    }
    if solver.max_nodes < 1 {
        return Err("--max-nodes must be at least 1".to_string().into());
    }
    if solver.workers < 1 {
        return Err("--workers must be at least 1".to_string().into());
    }

    Ok(Prepared {
        program,
        domain,
        labels,
        solver,
        output: cfg.output,
        trace_path: cfg.trace_path.clone(),
    })
}

/// Writes the box trace as CSV: `dim0_lo,dim0_hi,...,status`, one row
/// per processed box in processing order.
fn dump_trace(trace: Option<&[TraceRecord]>, dim: usize, path: &Path) -> Result<(), String> {
    let Some(trace) = trace else {
        return Err("trace recording was not enabled for this report".to_string());
    };
    let mut out = String::new();
    for d in 0..dim {
        out.push_str(&format!("dim{d}_lo,dim{d}_hi,"));
    }
    out.push_str("status\n");
    for row in trace {
        for (lo, hi) in &row.bounds {
            out.push_str(&format!("{lo},{hi},"));
        }
        out.push_str(row.status.as_str());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn print_text_report(report: &SolveReport, heading: &str) {
    println!("{heading}");
    println!(
        "  best value enclosure: [{}, {}]",
        report.best_value.lo(),
        report.best_value.hi()
    );
    match &report.incumbent {
        Some(inc) => {
            let coords: Vec<String> = inc.point.iter().map(f64::to_string).collect();
            println!("  incumbent: f = {} at ({})", inc.value, coords.join(", "));
        }
        None => println!("  incumbent: none (no point evaluation succeeded)"),
    }
    let c = &report.counts;
    println!(
        "  boxes: generated {} | value-eliminated {} | optimality-eliminated {} | boundary-fixed {} | separated {} | bisected {} | active at exit {}",
        c.generated,
        c.value_eliminated,
        c.optimality_eliminated,
        c.boundary_fixed,
        c.separated,
        c.bisected,
        c.active_at_exit
    );
    if c.degenerate_separated > 0 {
        println!(
            "  note: {} separation(s) had a degenerate (zero) separator adjoint",
            c.degenerate_separated
        );
    }
}

fn solve_run(p: &Prepared, separation: bool) -> (SolveReport, bool) {
    let mut cfg = p.solver.clone();
    cfg.separation = separation;
    let labels: &[String] = if separation { &p.labels } else { &[] };
    match solve(&p.program, &p.domain, labels, &cfg) {
        Ok(report) => (report, false),
        Err(SolverError::BudgetExhausted { report }) => (*report, true),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(i32::from(EXIT_USAGE));
        }
    }
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    without_separation: &'a SolveReport,
    with_separation: &'a SolveReport,
}

fn run(cli: &Cli) -> Result<u8, UsageError> {
    let cfg = resolve_config(cli)?;
    let prepared = prepare(&cfg)?;
    let mut exit = EXIT_OK;

    let reports: Vec<(String, SolveReport)> = if cli.compare {
        // the two runs are fully independent; off first
        let (off, off_exhausted) = solve_run(&prepared, false);
        let (on, on_exhausted) = solve_run(&prepared, true);
        if off_exhausted || on_exhausted {
            exit = EXIT_BUDGET;
        }
        vec![
            ("without separation".to_string(), off),
            ("with separation".to_string(), on),
        ]
    } else {
        let (report, exhausted) = solve_run(&prepared, cfg.separation);
        if exhausted {
            exit = EXIT_BUDGET;
        }
        let label = if cfg.separation {
            "with separation"
        } else {
            "without separation"
        };
        vec![(label.to_string(), report)]
    };

    match prepared.output {
        OutputFormat::Json => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            let json = if reports.len() == 2 {
                serde_json::to_string_pretty(&CompareOutput {
                    without_separation: &reports[0].1,
                    with_separation: &reports[1].1,
                })
                .expect("report serializes")
            } else {
                serde_json::to_string_pretty(&reports[0].1).expect("report serializes")
            };
            writeln!(handle, "{json}").expect("stdout");
        }
        OutputFormat::Text => {
            println!(
                "{} | dim {} | domain {}",
                prepared.program.name(),
                prepared.program.dim(),
                describe_domain(&prepared.domain)
            );
            for (label, report) in &reports {
                print_text_report(report, label);
            }
            if reports.len() == 2 {
                let off = reports[0].1.counts.generated;
                let on = reports[1].1.counts.generated;
                println!("generated boxes: {off} without separation, {on} with separation");
            }
            if exit == EXIT_BUDGET {
                println!("note: node budget exhausted; reports are partial");
            }
        }
    }

    if let Some(path) = &prepared.trace_path {
        // in compare mode the with-separation run carries the trace
        let report = &reports.last().expect("at least one run").1;
        if let Err(msg) = dump_trace(report.trace.as_deref(), prepared.program.dim(), path) {
            eprintln!("trace error: {msg}");
            return Ok(EXIT_TRACE_IO);
        }
    }

    Ok(exit)
}

fn describe_domain(domain: &IntervalVector) -> String {
    let first = domain[0];
    let uniform = domain.iter().all(|c| *c == first);
    if uniform {
        format!("[{}, {}]^{}", first.lo(), first.hi(), domain.len())
    } else {
        domain
            .iter()
            .map(|c| format!("[{}, {}]", c.lo(), c.hi()))
            .collect::<Vec<_>>()
            .join(" x ")
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::from(EXIT_OK);
            }
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
