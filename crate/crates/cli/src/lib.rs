//! Command-line front end and benchmark harness.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod keyfile;

pub use error::{CliError, Result};
