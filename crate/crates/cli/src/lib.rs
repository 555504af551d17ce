//! Front end for `pep-core`: problem files, result files and the `pep`
//! subcommands.

pub mod commands;
pub mod problem;
pub mod report;
