//! File formats, configuration and commands behind the `ajk` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod parallel;
pub mod report;

pub use error::{CliError, Result};
