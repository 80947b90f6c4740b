use std::process::ExitCode;

use clap::Parser;
use labelmask_cli::cli::{self, Cli};

fn main() -> ExitCode {
    match cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("labelmask: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
