use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use membrane_id::cli::{self, Command, Overrides};

/// Obstacle-constrained membrane solver and coefficient reconstruction.
///
/// Exit status: 0 converged (or stopped by the discrepancy principle),
/// 2 iteration budget exhausted, 1 error.
#[derive(Parser)]
#[command(name = "membrane-id", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one contact problem.
    Forward(Common),
    /// Reconstruct the coefficient from synthetic or ingested data.
    Invert(Common),
    /// Run TABLE1, EXP1, EXP2, EXP3 or CUSTOM and write results.csv.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Reference solutions on grids with at least 500 nodes per axis.
    #[arg(long)]
    paper_scale: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Forward(a) => (Command::Forward, a),
        Cmd::Invert(a) => (Command::Invert, a),
        Cmd::Experiment(a) => (Command::Experiment, a),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(cli::EXIT_ERROR as u8);
        }
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        paper_scale: args.paper_scale,
    };
    ExitCode::from(cli::run(cmd, &text, &overrides) as u8)
}
