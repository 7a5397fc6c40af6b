//! Command-line driver for `chi2dens`: configuration, orchestration of the
//! fit and post-processing steps, and output files.

pub mod args;
pub mod commands;
pub mod config;
pub mod failure;
pub mod output;

pub use args::{execute, Cli};
pub use config::RunConfig;
pub use failure::{Failure, FailureKind};
