//! `coalition` — batch front door for the coalition engine.
//!
//! Reads a scenario JSON file, runs exactly one analysis, writes the result
//! document to a file or standard output, and prints a human summary to
//! standard error. Exit codes: 0 success, 1 validation error (nothing is
//! written), 2 computation error.

mod engine;
mod report;
mod scenario;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use report::{sweep_csv, to_json_bytes, AnalysisPayload, ResultDocument};
use scenario::{load_scenario, Analysis, ScenarioSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: missing file, parse error, invalid field. Exit 1.
    Validation(String),
    /// The engine rejected the computation. Exit 2.
    Computation(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Computation(m) => write!(f, "computation error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "coalition",
    version,
    about = "Shapley division, core stability, and peer dynamics for multi-provider peer-assisted services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON)
    spec: PathBuf,
    /// Write the result document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis named in the scenario file
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the scenario's sample count (Monte Carlo Shapley)
        #[arg(long)]
        samples: Option<u64>,
        /// Override the scenario's dynamics step budget
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Sweep one named parameter over a grid
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to sweep: providers | peers | players.<i>.<field>
        #[arg(long)]
        axis: Option<String>,
        /// Grid as start,end,step (or a single value)
        #[arg(long)]
        grid: Option<String>,
        /// Companion CSV path (default: the --out path with extension .csv)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    configure_threads();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(err @ CliError::Validation(_)) => {
            eprintln!("{err}");
            1
        }
        Err(err @ CliError::Computation(_)) => {
            eprintln!("{err}");
            2
        }
    };
    std::process::exit(code);
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("COALITION_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid COALITION_THREADS={raw}"),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            common,
            samples,
            max_steps,
        } => {
            let mut spec = load_scenario(&common.spec)?;
            if spec.analysis == Analysis::Sweep {
                return Err(CliError::Validation(
                    "scenario names the `sweep` analysis: invoke the `sweep` subcommand".into(),
                ));
            }
            if let Some(s) = common.seed {
                spec.seed = Some(s);
            }
            if let Some(s) = samples {
                spec.samples = Some(s);
            }
            if let Some(m) = max_steps {
                spec.max_steps = Some(m);
            }
            spec.validate_options()?;
            execute(spec, common.out.as_deref(), None)
        }
        Command::Sweep {
            common,
            axis,
            grid,
            csv,
        } => {
            let mut spec = load_scenario(&common.spec)?;
            if spec.analysis != Analysis::Sweep {
                return Err(CliError::Validation(format!(
                    "scenario names the `{}` analysis: invoke the `run` subcommand",
                    spec.analysis.name()
                )));
            }
            if let Some(s) = common.seed {
                spec.seed = Some(s);
            }
            if let Some(a) = axis {
                spec.axis = Some(a);
            }
            if let Some(g) = grid {
                spec.grid = Some(parse_grid(&g)?);
            }
            spec.validate_options()?;
            let csv_path = csv.or_else(|| {
                common
                    .out
                    .as_ref()
                    .map(|p| p.with_extension("csv"))
            });
            execute(spec, common.out.as_deref(), csv_path.as_deref())
        }
    }
}

/// `a,b,step` to a monotone grid; a bare `a` is a one-point grid.
fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    let parse = |s: &str| {
        s.trim().parse::<f64>().map_err(|_| {
            CliError::Validation(format!("--grid: `{s}` is not a number"))
        })
    };
    match parts.as_slice() {
        [one] => Ok(vec![parse(one)?]),
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if step <= 0.0 || !step.is_finite() {
                return Err(CliError::Validation(
                    "--grid: step must be positive".into(),
                ));
            }
            let mut grid = Vec::new();
            let mut v = a;
            let dir = if b >= a { 1.0 } else { -1.0 };
            while (b - v) * dir >= -1e-9 {
                grid.push(v);
                v += dir * step;
            }
            if grid.is_empty() {
                return Err(CliError::Validation("--grid: empty range".into()));
            }
            Ok(grid)
        }
        _ => Err(CliError::Validation(
            "--grid expects `start,end,step` or a single value".into(),
        )),
    }
}

/// Computes, then writes: no artifact is touched before the analysis has
/// fully succeeded, so a nonzero exit leaves no partial output behind.
fn execute(
    spec: ScenarioSpec,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let payload = engine::run_analysis(&spec)?;
    let duration = started.elapsed().as_secs_f64();

    let summary = report::summarize(&payload);
    let csv_text = match &payload {
        AnalysisPayload::Sweep { points, .. } => Some(sweep_csv(points)),
        _ => None,
    };
    let doc = ResultDocument::new(spec, payload, duration);
    let bytes = to_json_bytes(&doc);

    match out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| {
            CliError::Computation(format!("cannot write {}: {e}", path.display()))
        })?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Computation(format!("cannot write stdout: {e}")))?;
        }
    }
    if let (Some(path), Some(text)) = (csv, csv_text) {
        std::fs::write(path, text).map_err(|e| {
            CliError::Computation(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    eprint!("{summary}");
    Ok(())
}
