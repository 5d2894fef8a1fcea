//! Config-driven experiment runner for `skewlab`.

pub mod config;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use runner::{run, RunError, RunManifest, Subcommand};
