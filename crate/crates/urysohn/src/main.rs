//! Command-line driver for convergence studies, the property suite, and
//! stencil dumps.
//!
//! Exit codes: 0 on success, 1 when a solve or invariant fails, 2 on usage
//! errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use urysohn::bspline::build_space;
use urysohn::harness::{
    all_passed, emit_report, parse_config, parse_n_list, report::write_atomic, run_property_suite,
    run_study, Level, ReportFormat, SeedChoice, StudySpec,
};
use urysohn::quasi_interp::{build_qip, write_stencils_csv, QipVariant};
use urysohn::solver::Method;
use urysohn::Error;

#[derive(Parser)]
#[command(
    name = "urysohn",
    about = "Spline quasi-interpolating projection solvers for Urysohn integral equations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and emit a CSV or markdown table.
    Study(StudyArgs),
    /// Run the invariant property suite.
    Properties {
        /// quick (n <= 64) or full (n <= 320)
        #[arg(long, default_value = "quick")]
        level: String,
    },
    /// Dump the stencils of a projector as CSV (i, node_index, xi_value, sigma).
    DumpQip {
        /// Projector variant: Q2, Q2dB or Q3
        #[arg(long)]
        qip: String,
        /// Number of subintervals
        #[arg(long)]
        n: usize,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// Flat key = value configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem id: test1 or test2
    #[arg(long)]
    problem: Option<String>,
    /// Parameter c for test2
    #[arg(long)]
    c: Option<f64>,
    /// collocation or highorder
    #[arg(long)]
    method: Option<String>,
    /// Projector variant: Q2, Q2dB or Q3
    #[arg(long)]
    qip: Option<String>,
    /// Comma-separated mesh sizes, e.g. 40,80,160
    #[arg(long = "n-list")]
    n_list: Option<String>,
    /// auto, project_rhs or exact_seed
    #[arg(long = "seed-policy")]
    seed_policy: Option<String>,
    /// Newton increment tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration cap
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Halve the Newton step when the residual grows
    #[arg(long)]
    damped: Option<bool>,
    /// csv or markdown
    #[arg(long)]
    format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_spec(args: &StudyArgs) -> Result<StudySpec, Error> {
    let mut spec = StudySpec::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let map = parse_config(&text)?;
        urysohn::harness::study::apply_config(&mut spec, &map)?;
    }
    if let Some(v) = &args.problem {
        spec.problem = v.clone();
    }
    if let Some(v) = args.c {
        spec.c = Some(v);
    }
    if let Some(v) = &args.method {
        spec.method = v.parse::<Method>()?;
    }
    if let Some(v) = &args.qip {
        spec.variant = v.parse::<QipVariant>()?;
    }
    if let Some(v) = &args.n_list {
        spec.n_list = parse_n_list(v)?;
    }
    if let Some(v) = &args.seed_policy {
        spec.seed = v.parse::<SeedChoice>()?;
    }
    if let Some(v) = args.tol {
        spec.tol = v;
    }
    if let Some(v) = args.max_iter {
        spec.max_iter = v;
    }
    if let Some(v) = args.damped {
        spec.damped = Some(v);
    }
    if let Some(v) = &args.format {
        spec.format = v.parse::<ReportFormat>()?;
    }
    if let Some(v) = &args.out {
        spec.out = Some(v.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn run_study_command(args: &StudyArgs) -> Result<bool, Error> {
    let spec = build_spec(args)?;
    let report = run_study(&spec)?;
    emit_report(&report, spec.format, spec.out.as_deref())?;
    let solved = report.rows.iter().filter(|r| r.data.is_some()).count();
    let failed = report.rows.len() - solved;
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", report.rows.len());
    }
    Ok(solved > 0)
}

fn run_properties_command(level: &str) -> Result<bool, Error> {
    let level: Level = level.parse()?;
    let results = run_property_suite(level);
    for r in &results {
        println!(
            "[{}] {}: {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let ok = all_passed(&results);
    println!(
        "{} of {} checks passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(ok)
}

fn run_dump_command(qip: &str, n: usize, out: Option<&PathBuf>) -> Result<bool, Error> {
    let variant: QipVariant = qip.parse()?;
    let space = Arc::new(build_space(variant.degree(), n)?);
    let scheme = build_qip(space, variant)?;
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            write_stencils_csv(&scheme, &mut buf)?;
            let text = String::from_utf8(buf).expect("CSV is valid UTF-8");
            write_atomic(path, &text)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            write_stencils_csv(&scheme, &mut stdout)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Study(args) => run_study_command(args),
        Command::Properties { level } => run_properties_command(level),
        Command::DumpQip { qip, n, out } => run_dump_command(qip, *n, out.as_ref()),
    };
    match outcome {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        // A consumer closing the pipe early is not our failure.
        Err(Error::Io(err)) if err.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::from(0),
        Err(Error::Usage(msg)) | Err(Error::Parameter(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
