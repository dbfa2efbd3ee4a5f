//! Configuration, batch experiments and file output.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentKind};
