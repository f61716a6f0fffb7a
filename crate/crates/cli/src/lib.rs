//! Front end for `coqe-core`: config files, presets, CSV output and
//! experiment bundles.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

pub use cli::Cli;
pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, ExitKind};
