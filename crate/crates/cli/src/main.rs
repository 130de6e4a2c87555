//! Command-line front end: solve a problem file, generate random feasible
//! instances, and run the iteration-count benchmark. Exit codes follow the
//! sysexits convention: 0 success, 2 solver did not finish, 64 bad flags,
//! 65 readable-but-unusable input, 66 unreadable input, 73 output not
//! writable.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ptf_core::bench::{
    self, BenchError, BenchReport, CellConfig, GenConfig, CSV_HEADER,
};
use ptf_core::finite::{ActivationPolicy, BasisCandidate};
use ptf_core::lp::{self, FileError, PrimalDualPoint};
use ptf_core::methods::{
    run, BetaPolicy, ConfigError, IterationRecord, Method, MethodConfig, Termination,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

const EXIT_INCOMPLETE: i32 = 2;
const EXIT_USAGE: i32 = 64;
const EXIT_DATA: i32 = 65;
const EXIT_NO_INPUT: i32 = 66;
const EXIT_CANT_WRITE: i32 = 73;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    File(#[from] FileError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Bench(BenchError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::File(FileError::Unreadable { .. }) => EXIT_NO_INPUT,
            CliError::File(FileError::Unwritable { .. }) => EXIT_CANT_WRITE,
            CliError::File(FileError::Malformed { .. }) => EXIT_DATA,
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Bench(BenchError::BadShape { .. }) => EXIT_USAGE,
            CliError::Bench(BenchError::TooManyFailures { .. }) => EXIT_INCOMPLETE,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Bench(e)
    }
}

#[derive(Parser)]
#[command(
    name = "ptf",
    version,
    about = "Parabolic target-following solvers for dense linear programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write a JSON report.
    Solve(SolveArgs),
    /// Generate one random feasible instance as a problem file.
    Gen(GenArgs),
    /// Run benchmark cells and write CSV plus a JSON bundle.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON) carrying a strictly feasible starting point.
    #[arg(long)]
    input: PathBuf,
    /// Method: tptfm, acptfm, or ptfm2.
    #[arg(long)]
    method: String,
    /// Target accuracy for v0 and the duality gap.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Rate parameter in (0,1).
    #[arg(long, default_value_t = 6.0 / 7.0)]
    r: f64,
    /// Outer-iteration limit.
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    /// Relative bracket width at which the predictor search stops.
    #[arg(long, default_value_t = 1e-3)]
    ls_tol: f64,
    /// Acceptance-level schedule: constant or proportional (tptfm only).
    #[arg(long, default_value = "constant")]
    beta_policy: String,
    /// Scale for the proportional schedule.
    #[arg(long, default_value_t = 0.5)]
    beta_scale: f64,
    /// Try exact-basis detection at centered iterates.
    #[arg(long)]
    finite_termination: bool,
    /// Basis-test gating: awake-tests or always.
    #[arg(long, default_value = "awake-tests")]
    activation: String,
    /// Per-iteration CSV trace (k,kind,alpha,v0,gap,delta,psi).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report JSON path; written to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Rows of the constraint matrix (1 <= m <= n/2).
    #[arg(long)]
    m: usize,
    /// Columns of the constraint matrix.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Which instance of the seeded family to emit.
    #[arg(long, default_value_t = 0)]
    index: u64,
    /// Problem file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Cell set: default (six desk-scale cells) or full (fifteen cells).
    #[arg(long, default_value = "default")]
    grid: String,
    /// Method: tptfm, acptfm, or ptfm2.
    #[arg(long, default_value = "ptfm2")]
    method: String,
    /// Instances per cell.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 20240801)]
    seed: u64,
    /// Target accuracy.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Try exact-basis detection at centered iterates.
    #[arg(long)]
    finite_termination: bool,
    /// Worker threads for instances within a cell (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for bench.csv and bench.json.
    #[arg(long)]
    out: PathBuf,
}

/// Everything one solve produced. Identical flags and input give identical
/// output except the wall_time fields.
#[derive(Serialize)]
struct SolveArtifact<'a> {
    method: Method,
    eps: f64,
    m: usize,
    n: usize,
    termination: Termination,
    final_gap: f64,
    predictor_count: usize,
    corrector_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_basis: Option<&'a BasisCandidate>,
    point: &'a PrimalDualPoint,
    warnings: &'a [String],
    records: &'a [IterationRecord],
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Gen(args) => cmd_gen(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn parse_method(name: &str) -> Result<Method, CliError> {
    name.parse::<Method>().map_err(CliError::from)
}

fn build_config(args: &SolveArgs) -> Result<MethodConfig, CliError> {
    let mut config = MethodConfig::new(parse_method(&args.method)?);
    config.eps = args.eps;
    config.r = args.r;
    config.max_outer = args.max_outer;
    config.ls_rel_tol = args.ls_tol;
    config.beta_policy = match args.beta_policy.as_str() {
        "constant" => BetaPolicy::Constant,
        "proportional" => BetaPolicy::Proportional {
            scale: args.beta_scale,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown beta policy {other:?} (expected constant or proportional)"
            )))
        }
    };
    config.finite_termination = args.finite_termination;
    config.activation = match args.activation.as_str() {
        "awake-tests" => ActivationPolicy::AwakeTests,
        "always" => ActivationPolicy::Always,
        other => {
            return Err(CliError::Usage(format!(
                "unknown activation policy {other:?} (expected awake-tests or always)"
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| {
        CliError::File(FileError::Unwritable {
            path: path.display().to_string(),
            source,
        })
    })
}

fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("k,kind,alpha,v0,gap,delta,psi\n");
    for rec in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            rec.k, rec.kind, rec.alpha, rec.v0_after, rec.gap_after, rec.delta_after,
            rec.psi_after
        );
    }
    out
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let config = build_config(args)?;
    let (inst, start) = lp::load_problem(&args.input)?;
    let u0 = start.ok_or_else(|| {
        CliError::Data(format!(
            "{}: no starting point; solving needs x0, s0, y0",
            args.input.display()
        ))
    })?;
    lp::check_feasibility(&inst, &u0)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;

    let outcome = run(&inst, &u0, &config)?;
    let report = &outcome.report;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    if let Some(path) = &args.trace {
        write_text(path, &trace_csv(&report.records))?;
    }
    let artifact = SolveArtifact {
        method: config.method,
        eps: config.eps,
        m: inst.m(),
        n: inst.n(),
        termination: report.termination,
        final_gap: report.final_gap,
        predictor_count: report.predictor_count,
        corrector_count: report.corrector_count,
        exact_basis: report.exact_basis.as_ref(),
        point: &outcome.point,
        warnings: &report.warnings,
        records: &report.records,
    };
    let json = serde_json::to_string_pretty(&artifact).expect("report serializes") + "\n";
    match &args.report {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }

    Ok(if report.termination.is_success() {
        0
    } else {
        EXIT_INCOMPLETE
    })
}

fn cmd_gen(args: &GenArgs) -> Result<i32, CliError> {
    let cfg = GenConfig {
        m: args.m,
        n: args.n,
        seed: args.seed,
    };
    let (inst, u0) = match bench::generate(&cfg, args.index) {
        Ok(pair) => pair,
        Err(e @ BenchError::BadShape { .. }) => {
            return Err(CliError::Usage(e.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    lp::save_problem(&args.out, &inst, Some(&u0))?;
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let method = parse_method(&args.method)?;
    let grid = match args.grid.as_str() {
        "default" => bench::default_grid(),
        "full" => bench::full_grid(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown grid {other:?} (expected default or full)"
            )))
        }
    };
    if args.count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        // Ignore the error when a pool already exists (tests call in-process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    fs::create_dir_all(&args.out).map_err(|source| {
        CliError::File(FileError::Unwritable {
            path: args.out.display().to_string(),
            source,
        })
    })?;

    let mut base = MethodConfig::new(method);
    base.eps = args.eps;
    base.finite_termination = args.finite_termination;
    base.validate()?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut cells = Vec::with_capacity(grid.len());
    for (m, n) in grid {
        let cell = CellConfig {
            m,
            n,
            method,
            count: args.count,
            seed: args.seed,
        };
        let stats = bench::run_cell(&cell, &base)?;
        let row = stats.csv_row();
        println!("{row}");
        csv.push_str(&row);
        csv.push('\n');
        cells.push(stats);
    }
    let report = BenchReport {
        seed: args.seed,
        eps: args.eps,
        count: args.count,
        finite_termination: args.finite_termination,
        cells,
    };
    write_text(&args.out.join("bench.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(&args.out.join("bench.json"), &json)?;
    Ok(0)
}
