//! Batch commands over the need-detection pipeline, the household simulator
//! and the similarity evaluator.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 gateway error.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

use config::FileConfig;

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string()))?;
    execute(&cli, out)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mode = match &cli.command {
        Command::Eval(a) => a.mode,
        _ => None,
    };
    let config = RunConfig::resolve(&cli.common, &file, mode)?;
    match &cli.command {
        Command::Pipeline => commands::pipeline(&config, out),
        Command::Sim(args) => commands::sim(&config, args, out),
        Command::Eval(args) => commands::eval(&config, args, out),
    }
}
