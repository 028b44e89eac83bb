//! `hamtube`: evaluate and invert Hamiltonian tubes for cotangent-lifted
//! SO(3)/SL(2,R) actions, certify their contracts at sampled points, and
//! sweep residuals over parameter grids.
//!
//! Data goes to stdout as JSON (CSV for sweeps); diagnostics go to stderr.
//! Exit codes: 0 success, 2 schema/configuration error, 3 domain exit,
//! 4 verification failure.

mod commands;
mod io;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hamtube",
    version,
    about = "Hamiltonian tubes for cotangent-lifted group actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scalar tube kernels.
    Specialfn {
        #[command(subcommand)]
        command: commands::SpecialfnCommand,
    },
    /// Tube evaluation, inversion, verification and sweeps.
    Tube {
        #[command(subcommand)]
        command: commands::TubeCommand,
    },
    /// Adapted splittings.
    Splitting {
        #[command(subcommand)]
        command: commands::SplittingCommand,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Specialfn { command } => commands::run_specialfn(command),
        Command::Tube { command } => commands::run_tube(command),
        Command::Splitting { command } => commands::run_splitting(command),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.message);
            std::process::exit(err.code);
        }
    }
}
