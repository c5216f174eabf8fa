//! Experiment driver for spectrally constrained pulse synthesis: config
//! handling, result tables, the `run`/`filter` commands and the self-test.

pub mod commands;
pub mod config;
pub mod error;
pub mod selftest;
pub mod tables;

pub use error::{CliError, Result};
