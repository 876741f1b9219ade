use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddsde_core::experiment::{run, RunOptions, OUTPUT_DIR_ENV};
use ddsde_core::models::{describe, list_models};
use ddsde_core::Error;

#[derive(Parser)]
#[command(name = "ddsde", version, about = "Batch experiments for distribution-dependent SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
        /// Repeat at half the step size and attach the companion metrics.
        #[arg(long)]
        refine: bool,
    },
    /// Print a model's parameters, flags and bounds.
    Describe { model: String },
    ListModels,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical_abort() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, threads, refine } => {
            let output_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
            match run(&config, &RunOptions { threads, refine, output_dir }) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report.metrics).expect("metrics serialize"));
                    if report.verified == Some(false) {
                        eprintln!("verification failed for {}", report.experiment);
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
        Command::Describe { model } => match describe(&model) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("description serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::ListModels => {
            for m in list_models() {
                println!("{m}");
            }
            ExitCode::SUCCESS
        }
    }
}
