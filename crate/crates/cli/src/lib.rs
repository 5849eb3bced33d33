//! Batch runner for coalsim: experiment configs, the subcommands behind the
//! `coalsim` binary and the verification suites.

pub mod args;
pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command, RunOutcome};
pub use config::{ConfigError, ExperimentConfig};
