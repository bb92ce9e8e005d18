//! Command-line companion to `mrgnn-core`: config files, dataset and
//! checkpoint formats, CSV reports, and the subcommand implementations
//! behind the `mrgnn` binary.

pub mod checkpoint;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod report;
