//! Experiment driver for the `erkn` command-line tool.

pub mod config;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, Kind, RawConfig};
pub use runner::{run_experiment, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] erkn_core::Error),
}
