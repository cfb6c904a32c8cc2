//! `nonsimplify`: oracle values, plug-in estimates, simulation sweeps and
//! vine scores from the command line.
//!
//! Every subcommand starts from a JSON configuration with library defaults,
//! merges `--config FILE`, then explicit flags, then `--set key=value`
//! overrides (keys must already exist). Results are JSON on stdout or in
//! `--output`.
//!
//! Exit codes: 0 success, 2 user or configuration error, 3 numeric failure,
//! 4 degenerate data (empty kernel windows).

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonsimplify_core::Error;

#[derive(Parser)]
#[command(
    name = "nonsimplify",
    version,
    about = "Measures of non-simplifyingness for conditional copulas"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct GlobalOpts {
    /// JSON configuration file merged over the defaults.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Override a configuration key; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output file (or directory for `simulate`); stdout when absent.
    #[arg(long, short, global = true)]
    pub output: Option<std::path::PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "NONSIMPLIFY_THREADS", global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Population value of a measure for a built-in model.
    Oracle(commands::OracleArgs),
    /// Plug-in estimate of a measure from a CSV dataset.
    Estimate(commands::EstimateArgs),
    /// Bandwidth sweep over replicated samples; writes rows.csv and summary.csv.
    Simulate(commands::SimulateArgs),
    /// Worst-, best- and average-case vine scores of a CSV dataset.
    VineScore(commands::VineScoreArgs),
    /// All labeled regular vines in dimension d.
    EnumerateVines(commands::EnumerateArgs),
    /// Draw a dataset from a built-in model and write it as CSV.
    Sample(commands::SampleArgs),
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn user(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_degenerate() => 4,
            Error::Domain(_) => 3,
            Error::DesignPointFailures { first, .. } if matches!(**first, Error::Domain(_)) => 3,
            _ => 2,
        };
        let mut message = e.to_string();
        if code == 4 {
            message.push_str("; try a larger bandwidth h");
        }
        Failure { code, message }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(Failure::user("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::user(format!("cannot start {t} worker threads: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Oracle(a) => commands::oracle(g, a),
        Command::Estimate(a) => commands::estimate(g, a),
        Command::Simulate(a) => commands::simulate(g, a),
        Command::VineScore(a) => commands::vine_score(g, a),
        Command::EnumerateVines(a) => commands::enumerate(g, a),
        Command::Sample(a) => commands::sample(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
