//! Command-line front end: configuration loading and the `run`, `sweep` and
//! `validate` commands.

pub mod commands;
pub mod config;

pub use commands::{cmd_run, cmd_sweep, cmd_validate, CliError, RunPaths};
pub use config::{Config, ConfigError};
