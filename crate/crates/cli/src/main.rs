mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Settings;
use error::CliError;

#[derive(Parser)]
#[command(name = "asep2d", version, about = "Two-dimensional asymmetric exclusion: simulation, exact checks and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a kernel file and print its derived rates.
    Kernel(RunArgs),
    /// Variance of the integrated occupation at the origin.
    Simulate(RunArgs),
    /// Second-class particle campaign.
    Coupled(RunArgs),
    /// Operator identities on a small torus.
    ExactCheck(RunArgs),
    /// Lower-bound curves over a lambda grid.
    Bounds(RunArgs),
    /// Fit a growth model to a CSV column.
    Fit(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Simulate(_) => "simulate",
            Command::Coupled(_) => "coupled",
            Command::ExactCheck(_) => "exact-check",
            Command::Bounds(_) => "bounds",
            Command::Fit(_) => "fit",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Kernel(a)
            | Command::Simulate(a)
            | Command::Coupled(a)
            | Command::ExactCheck(a)
            | Command::Bounds(a)
            | Command::Fit(a) => a,
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let args = command.args();
    let settings = match &args.config {
        Some(path) => Settings::load(path)?.overlay(args.settings.clone()),
        None => args.settings.clone(),
    };
    let run = match command {
        Command::Kernel(_) => {
            print!("{}", commands::kernel(&settings)?);
            return Ok(());
        }
        Command::Simulate(_) => commands::simulate(&settings)?,
        Command::Coupled(_) => commands::coupled(&settings)?,
        Command::ExactCheck(_) => commands::exact_check(&settings)?,
        Command::Bounds(_) => commands::bounds(&settings)?,
        Command::Fit(_) => commands::fit(&settings)?,
    };
    let manifest = run.finish()?;
    println!("{}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record(cli.command.name()));
            ExitCode::FAILURE
        }
    }
}
