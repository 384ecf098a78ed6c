//! Config-driven experiment runner for the ridgeless kernel solver.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run_experiment, RunOutcome};
