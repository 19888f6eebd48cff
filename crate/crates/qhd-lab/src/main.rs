use clap::{Parser, Subcommand};
use qhd_lab::cli;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qhd-lab",
    version,
    about = "Simulator and benchmark suite for gradient-based quantum Hamiltonian descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write series.csv + manifest.json
    Run {
        /// Experiment config file (TOML-style key = value sections)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config's seed)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a verification suite and print a pass/fail table
    Verify {
        #[arg(value_enum)]
        suite: cli::Suite,
    },
    /// Render series.csv files into a static SVG
    Plot {
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
        /// Input series.csv files
        #[arg(required = true)]
        series: Vec<PathBuf>,
    },
    /// List the built-in objective registry
    ListObjectives,
}

fn main() -> ExitCode {
    cli::init_threads();
    let args = Cli::parse();
    match dispatch(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(args: Cli) -> qhd_lab::Result<bool> {
    match args.command {
        Command::Run { config, out, seed } => {
            let cfg = cli::parse_config(&config)?;
            let dir = cli::cmd_run(&cfg, out.as_deref(), seed)?;
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Verify { suite } => cli::cmd_verify(suite),
        Command::Plot { out, series } => {
            let paths: Vec<&std::path::Path> = series.iter().map(|p| p.as_path()).collect();
            cli::cmd_plot(&paths, &out)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::ListObjectives => {
            cli::list_objectives();
            Ok(true)
        }
    }
}
