use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cold::models::Boundary;
use cold_cli::commands::{self, Global, ReproduceArgs};
use cold_cli::config::Overrides;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Parser)]
#[command(name = "cold", version, about = "Counterdiabatic optimized local driving on small spin chains")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the optimiser seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the file and COLD_OUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the model boundary condition.
    #[arg(long, global = true, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Report fidelity with the (near-)degenerate ground subspace.
    #[arg(long, global = true)]
    subspace_fidelity: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimise or evaluate one protocol.
    Run,
    /// Scan a two-parameter grid.
    Sweep,
    /// Recompute a reference table and score it.
    Reproduce {
        /// Table id, T1 to T6.
        table: String,
        /// Optimiser evaluations per run.
        #[arg(long)]
        evaluations: Option<usize>,
        /// Comma-separated seeds; the best is kept.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Gauge-potential tables and coefficients along the schedule.
    Agp,
    /// Gap along the path and the adiabatic time bound.
    Spectrum,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = Global {
        config: cli.config,
        jobs: cli.jobs,
        out: cli.out,
        overrides: Overrides {
            seed: cli.seed,
            boundary: cli.boundary.map(|b| match b {
                BoundaryArg::Open => Boundary::Open,
                BoundaryArg::Periodic => Boundary::Periodic,
            }),
            subspace_fidelity: cli.subspace_fidelity,
        },
    };
    let result = match cli.command {
        Command::Run => commands::run(&g),
        Command::Sweep => commands::sweep_cmd(&g),
        Command::Reproduce {
            table,
            evaluations,
            seeds,
        } => commands::reproduce(
            &g,
            &ReproduceArgs {
                table,
                evaluations,
                seeds,
            },
        ),
        Command::Agp => commands::agp(&g),
        Command::Spectrum => commands::spectrum(&g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
