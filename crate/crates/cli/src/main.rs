use std::error::Error;
use std::process::ExitCode;

use clap::Parser;
use morse_cli::Cli;

fn main() -> ExitCode {
    match morse_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
