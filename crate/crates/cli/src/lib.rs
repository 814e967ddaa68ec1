//! Experiment harness over the `vecreduce` library: config files, the six
//! subcommands, and result emission.

pub mod commands;
pub mod config;
pub mod instances;
pub mod output;

use std::path::PathBuf;

pub use commands::run;
pub use config::{Experiment, ExperimentConfig, Tolerances};
pub use output::Outcome;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Library(#[from] vecreduce::Error),
}
