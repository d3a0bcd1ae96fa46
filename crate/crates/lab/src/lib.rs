//! File formats, sweeps and the command-line front end for `wcs-core`.
//!
//! Every subcommand is a function of the scenario, its flags and the seed, so
//! rerunning a command reproduces its output byte for byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;
pub mod validate;

pub use error::LabError;
