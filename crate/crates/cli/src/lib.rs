//! Batch front end for `tslab-core`: strict JSON experiment configs, built-in
//! scenarios, and deterministic CSV/JSON artifacts.

pub mod config;
mod error;
pub mod experiments;
pub mod output;
pub mod scenarios;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, Parameters};
pub use error::RunError;
pub use output::{execute, run, ExperimentReport};
