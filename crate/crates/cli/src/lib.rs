//! Command-line front end: configuration, dispatch and output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use cli::main_with;
pub use config::{ExperimentConfig, Format};
pub use error::{exit, CliError};
pub use output::{Check, RunRecord};
