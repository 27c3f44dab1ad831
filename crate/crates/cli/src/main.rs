use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod pipeline;
mod report;

use report::{CliError, Report};

#[derive(Parser)]
#[command(name = "mesp", version, about = "Certified subset selection for covariance matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on a covariance matrix and write a report.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    /// Frank-Wolfe on the continuous relaxation (upper bound).
    Fw,
    /// Relaxation followed by randomized rounding.
    Sample,
    /// Relaxation followed by derandomized rounding.
    Dsample,
    /// Greedy start followed by swap local search, with a dual certificate.
    Local,
    /// Frank-Wolfe on the trace-of-inverse relaxation (lower bound).
    AmespFw,
    /// Trace-of-inverse relaxation followed by volume sampling.
    AmespVolume,
    /// Swap local search on the trace of the inverse.
    AmespLocal,
    /// Exhaustive enumeration (small n only).
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Dense,
    Mtx,
}

#[derive(clap::Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Subset size.
    #[arg(long)]
    pub s: usize,
    /// Covariance matrix: dense text/CSV or Matrix Market (`.mtx`).
    #[arg(long)]
    pub input: PathBuf,
    /// Override format detection by extension.
    #[arg(long, value_enum)]
    pub input_format: Option<InputKind>,
    /// Frank-Wolfe target gap.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Frank-Wolfe iteration limit.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Local-search acceptance threshold (default 1e-6; 1e-9 for amesp-local).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop relaxation entries below 1e-8 before sampling.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub restrict_support: bool,
    /// Relative eigenvalue cutoff for the numerical rank (default n·ε).
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write one CSV row per sampling trial here.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Also enumerate the exact optimum and report gaps.
    #[arg(long)]
    pub with_oracle: bool,
    /// Largest number of subsets the oracle may enumerate.
    #[arg(long, default_value_t = mesp::oracle::DEFAULT_CAP)]
    pub oracle_cap: usize,
    /// Known optimal value used for gap columns.
    #[arg(long)]
    pub reference: Option<f64>,
    /// Worker cap for parallel trials.
    #[arg(long, env = "MESP_THREADS")]
    pub threads: Option<usize>,
}

fn write_output(args: &SolveArgs, report: &Report) -> Result<(), CliError> {
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let (report, records) = pipeline::run(args)?;
    if let (Some(path), Some(records)) = (&args.records, records) {
        std::fs::write(path, records).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    write_output(args, &report)?;
    report.check_bounds()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mesp: {e}");
            ExitCode::from(e.code())
        }
    }
}
