//! Command-line layer: configuration, CSV output and the five subcommands
//! `simulate`, `oracle`, `compare`, `sweep` and `check`.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::{exit, CliError};
