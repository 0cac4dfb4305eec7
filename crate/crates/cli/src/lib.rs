//! Batch front end for the zigzag stability lab.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{run, Outcome};
pub use config::{command, from_matches, parse_file_text, ConfigError, RunConfig, Subcommand};
pub use error::CliError;
