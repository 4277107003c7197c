use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aoflow::error::RunError;
use aoflow::io::{cmd_convergence, cmd_energy, cmd_step, Experiment, RunConfig};
use aoflow::schemes::SchemeKind;

#[derive(Parser)]
#[command(name = "aoflow", about = "Coupled two-fluid flow experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme(s) to run, comma separated; overrides `scheme`.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Refinement study on the manufactured solution.
    Convergence(Common),
    /// Energy decay of the sine-vortex flow.
    Energy(Common),
    /// Flow over the backward-facing step.
    Step(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Convergence(c) => (Experiment::Convergence, c),
        Command::Energy(c) => (Experiment::Energy, c),
        Command::Step(c) => (Experiment::Step, c),
    };
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path, Some(experiment)),
        None => RunConfig::parse("", Some(experiment)),
    };
    if let (Ok(c), Some(list)) = (&mut config, &common.scheme) {
        match list.split(',').map(|s| s.trim().parse::<SchemeKind>()).collect() {
            Ok(v) => c.schemes = v,
            Err(e) => {
                eprintln!("error: --scheme: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = common.out.unwrap_or_else(|| config.output_dir.clone());
    let result = match experiment {
        Experiment::Convergence => cmd_convergence(&config, &out).map(|_| ()),
        Experiment::Energy => cmd_energy(&config, &out).map(|_| ()),
        Experiment::Step => cmd_step(&config, &out).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ RunError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
