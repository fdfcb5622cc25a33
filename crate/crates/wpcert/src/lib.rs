//! Command-line front end for `wpcert-core`: configuration files, model
//! and report formats, parallel drivers and the six subcommands
//! (`bound`, `simulate`, `match`, `tail`, `stein`, `selftest`).
//!
//! Every command is a pure function of its configuration and seed; the
//! `--workers` setting only changes how partitions are scheduled, never the
//! order in which they are combined, so outputs are byte-identical across
//! worker counts.
// Validation is written as `!(x > 0.0)` throughout so that NaN is rejected
// together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod bundled;
pub mod commands;
pub mod config;
pub mod formats;
pub mod models;
pub mod parallel;

use std::fmt;

pub use config::{ConfigError, RunConfig};

/// Process exit code for success.
pub const EXIT_OK: i32 = 0;
/// Process exit code for output failures (unwritable `--out`).
pub const EXIT_IO: i32 = 1;
/// Process exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for numerical or feasibility failures.
pub const EXIT_NUMERIC: i32 = 3;

/// Errors surfaced by the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration file problem (syntax, missing or invalid key).
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// A referenced input file is missing or malformed.
    #[error("input error: {0}")]
    Input(String),
    /// A numerical or feasibility failure in the core library.
    #[error("numeric error: {0}")]
    Numeric(#[from] wpcert_core::Error),
    /// Self-test checks that did not reproduce their golden values.
    #[error("selftest failed: {}", .0.join(", "))]
    SelftestFailed(Vec<String>),
    /// Writing results failed.
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// The process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_CONFIG,
            CliError::Numeric(_) | CliError::SelftestFailed(_) => EXIT_NUMERIC,
            CliError::Output(_) => EXIT_IO,
        }
    }
}

/// Output rendering selected by `--format`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    /// JSON document.
    #[default]
    Json,
    /// Comma-separated values.
    Csv,
    /// Aligned text table.
    Table,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Table => "table",
        })
    }
}
