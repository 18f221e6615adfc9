//! Command-line driver for `flimdeconv`.
//!
//! Every subcommand writes its outputs plus a JSON [`RunManifest`] holding the
//! argv, the resolved configuration, seeds and SHA-256 digests of inputs and
//! outputs. `replay` re-runs a manifest and checks that the digests match.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use pipeline::{BranchMetrics, PipelineConfig, PipelineMetrics};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Parses `argv` (program name first) and runs it, reporting errors on
/// standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = commands::to_strings(argv);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::execute(&cli.command, argv.get(1..).unwrap_or_default()) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
