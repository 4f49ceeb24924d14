//! Configuration, orchestration and artifacts for the lsoc experiments.

pub mod cache;
pub mod config;
mod error;
pub mod experiment;
pub mod output;

pub use config::{load_config, load_config_with, ExperimentConfig, Mode, Overrides};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, Summary};
