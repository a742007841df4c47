//! Library surface of the command-line front end, exposed for the
//! integration and acceptance tests.

pub mod build;
pub mod commands;
pub mod config;
pub mod report;

pub use config::{CliError, CliResult, Config};
