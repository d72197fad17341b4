//! The `cqcim` command line: configuration, commands and the binary file
//! formats that connect the exporter, the trainer and the evaluator.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::CliError;
