//! Std companion to `hjbi-core`: TOML run configs, field CSV files,
//! key/value reports and the `hjbi` command line.

pub mod cli;
pub mod config;
pub mod fieldio;
pub mod report;
