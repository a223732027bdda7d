//! Std companion of `lipcert-core`: file formats, a rayon sweep executor,
//! experiment configs and the `lipcert` command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;

pub use error::CliError;
