use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use ridgeless_cli::{run_experiment, CliError, ExperimentConfig};

/// Used when neither the flag nor the config names an output directory.
const OUTPUT_DIR_ENV: &str = "RIDGELESS_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "ridgeless-output";

#[derive(Parser)]
#[command(
    name = "ridgeless",
    version,
    about = "Ridgeless kernel solver for infinite-horizon economic models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `grid.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Only errors reach stderr; the summary is not printed.
        #[arg(long)]
        quiet: bool,
    },
}

fn run(config_path: &Path, output_dir: Option<PathBuf>, seed: Option<u64>, quiet: bool) -> Result<(), CliError> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let Some(s) = seed {
        config.grid.seed = s;
    }
    let directory = output_dir
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR));
    config.output.directory = Some(directory.display().to_string());
    info!(
        "running {:?} on {:?} into {}",
        config.experiment.kind,
        config.model.name,
        directory.display()
    );
    let outcome = run_experiment(&config, &directory)?;
    if !quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        for file in &outcome.files {
            println!("wrote {}", file.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        output_dir,
        seed,
        quiet,
    } = cli.command;
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&config, output_dir, seed, quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).expect("record serialises"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
