//! Command layer for `corescale`: configuration, report assembly and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::{CliError, CliResult};
