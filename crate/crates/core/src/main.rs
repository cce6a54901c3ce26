use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eigenopt::harness::{cmd_inspect_options, cmd_plot, cmd_run, RunOptions, Seeds};

#[derive(Parser)]
#[command(name = "eigenopt", version, about = "Eigenoption and option-value experiments in tabular gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (config, algorithm, seed) cell of an experiment config.
    Run {
        config: PathBuf,
        /// Seeds to run instead of the config's, e.g. `0..10` or `1,5,9`.
        #[arg(long)]
        seeds: Option<Seeds>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Results directory (default: results/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the eigen and bottleneck options of a config and write
    /// per-option diagnostics.
    InspectOptions {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Redraw the plots of a results directory.
    Plot { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seeds, workers, out } => {
            cmd_run(&config, &RunOptions { seeds, workers, out }).map(|e| {
                let runs: usize = e.runs.values().map(Vec::len).sum();
                println!("{runs} runs written to {}", e.out_dir.display());
            })
        }
        Command::InspectOptions { config, out } => cmd_inspect_options(&config, out.as_deref()).map(|(e, b)| {
            println!("{e} eigenoptions, {b} bottleneck options");
        }),
        Command::Plot { dir } => cmd_plot(&dir).map(|n| println!("{n} plots written")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
