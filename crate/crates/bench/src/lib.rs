//! Experiment recipes, reports and the command-line front end for draft-model
//! routing.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod runs;

pub use config::ExperimentConfig;
pub use error::{BenchError, BenchResult};
