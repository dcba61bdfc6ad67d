//! `metric-uq`: fit Fréchet regressions, build prediction balls, test for
//! heteroscedasticity, select variables and run coverage simulations.
//!
//! Every failure prints one `ERROR <CODE> <message>` line on stderr and
//! exits with status 1.

mod commands;
mod data;
mod error;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "metric-uq", version, about = "Prediction regions for metric-space responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a global Fréchet regression and save it.
    Fit(commands::FitArgs),
    /// Build a prediction region from a model and held-out data.
    Region(commands::RegionArgs),
    /// Per-row membership of new data in a saved region.
    Contains(commands::EvalArgs),
    /// Fraction of new data inside a saved region.
    Coverage(commands::EvalArgs),
    /// Distance-covariance test of residual independence.
    TestHomoscedastic(commands::TestArgs),
    /// Per-variable significance with Bonferroni correction.
    Select(commands::SelectArgs),
    /// Run a simulation study from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the report CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Region(a) => commands::region(&a),
        Command::Contains(a) => commands::contains(&a),
        Command::Coverage(a) => commands::coverage(&a),
        Command::TestHomoscedastic(a) => commands::test_homoscedastic(&a),
        Command::Select(a) => commands::select(&a),
        Command::Simulate { config, out, threads } => {
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                if n == 0 {
                    return Err(CliError::new("INVALID_ARGUMENT", "--threads must be at least 1"));
                }
                pool = pool.num_threads(n);
            }
            let pool = pool
                .build()
                .map_err(|e| CliError::new("IO", format!("cannot start worker pool: {e}")))?;
            pool.install(|| simulate::run(&config, &out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::new("USAGE", e.kind().to_string()).line());
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
