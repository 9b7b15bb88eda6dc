//! Command-line harness: configuration, run artifacts and subcommands.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod io;

pub use config::RunConfig;
