//! Library surface of the command-line front end: run-configuration parsing
//! and the command implementations, importable by tests and fuzz targets.

pub mod commands;
pub mod config;
pub mod output;
