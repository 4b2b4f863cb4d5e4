//! Library backing the mixclean command-line tool: argument parsing,
//! JSON/CSV artifact I/O, run manifests, and the command implementations.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use cli::run;
pub use error::{CliError, Result};
