//! Command-line front end: configuration parsing, subcommands and output schemas.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command, Output};
pub use config::{ConfigError, RunConfig};
