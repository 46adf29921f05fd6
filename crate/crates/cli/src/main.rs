//! `ccm`: command-line harness for evolution runs, explicit-formula comparisons
//! and spectral diagnostics.
//!
//! Exit codes: 0 ok, 1 configuration or input, 2 drift or discrepancy over
//! budget, 3 blowup, 4 explicit-formula solver failure, 5 spectral failure.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "ccm", version, about = "Spectral laboratory for the Calogero-Moser derivative NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial data and monitor the conservation laws.
    Simulate(RunArgs),
    /// Compare the stepper with the explicit formula along horizontal lines.
    Compare(RunArgs),
    /// Lax spectrum, kappa_0 and beta; optionally the drift of beta along a run.
    Spectral(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sectioned key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override one setting, e.g. `--set run.dt=5e-4`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

type Runner = fn(&RunConfig) -> Result<u8, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, run): (&str, _, Runner) = match &cli.command {
        Command::Simulate(a) => ("simulate", a, commands::simulate),
        Command::Compare(a) => ("compare", a, commands::compare),
        Command::Spectral(a) => ("spectral", a, commands::spectral),
    };
    let result = RunConfig::load(&args.config, &args.set).map_err(CliError::from).and_then(|cfg| {
        let code = run(&cfg)?;
        Ok((code, cfg.output.dir))
    });
    match result {
        Ok((code, dir)) => {
            println!("ccm {name}: exit {code}, reports in {}", dir.display());
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("ccm {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
