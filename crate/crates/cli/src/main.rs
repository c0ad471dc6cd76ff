use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use openbath_cli::output::write_files;
use openbath_cli::{Invocation, RunMode};

#[derive(Parser, Debug)]
#[command(name = "openbath", version, about = "Stationary states of quantum systems coupled to several thermal reservoirs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model preset, replacing the scenario's model, e.g. `electronic:N=10,eps=1,U=1,T=0`.
    #[arg(long)]
    model: Option<String>,
    /// Tolerance of the balance and Gibbs checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Replace the coefficients of one reservoir, `k=file` (debugging).
    #[arg(long = "debug-coefficients", value_name = "K=FILE")]
    debug_coefficients: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the stationary state.
    Steady(Common),
    /// Check the balance relations of every reservoir.
    Verify(Common),
    /// Solve on a grid of one scenario parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of the swept number, e.g. `baths.1.beta`.
        #[arg(long)]
        path: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Option<Vec<f64>>,
    },
    /// Reproduce the two-lead non-monotone occupation example.
    Fig1(Common),
    /// Tabulate the reservoir occupations and their average on a grid.
    OccupationScan(Common),
}

fn invocation(cli: Cli) -> Invocation {
    let (mode, common, path, values) = match cli.command {
        Command::Steady(c) => (RunMode::Steady, c, None, None),
        Command::Verify(c) => (RunMode::Verify, c, None, None),
        Command::Sweep { common, path, values } => (RunMode::Sweep, common, path, values),
        Command::Fig1(c) => (RunMode::Fig1, c, None, None),
        Command::OccupationScan(c) => (RunMode::OccupationScan, c, None, None),
    };
    Invocation {
        mode,
        config: common.config,
        out: common.out,
        model: common.model,
        tol: common.tol,
        debug_coefficients: common.debug_coefficients,
        sweep_path: path,
        sweep_values: values,
    }
}

fn main() -> ExitCode {
    let inv = invocation(Cli::parse());
    let result = inv.load().and_then(|raw| {
        let outcome = inv.execute_raw(&raw)?;
        write_files(&inv.output_dir(&raw), &outcome.files)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for n in &outcome.notices {
                eprintln!("notice: {n}");
            }
            match outcome.failure {
                Some(f) => {
                    eprintln!("verification failed: {f}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
