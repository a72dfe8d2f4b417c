//! File formats, reports and the command-line driver for `lachesis-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use crate::error::CliError;
