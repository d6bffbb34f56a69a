//! Command-line front end: point files, reports and subcommands.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod pointfile;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
