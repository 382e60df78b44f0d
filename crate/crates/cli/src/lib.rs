//! Command-line front end: `train`, `evaluate`, `scenario` and `serve`.
//!
//! Every command that writes files puts them in one output directory next to
//! a `manifest.json` listing each file with its SHA-256.

pub mod args;
pub mod error;
pub mod evaluate;
pub mod manifest;
pub mod scenario;
pub mod serve;
pub mod train;

use std::path::PathBuf;

pub use args::Cli;
pub use error::CliError;

/// Root for default output directories: `$MORSE_OUT`, else `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os("MORSE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    use args::Command;
    match cli.command {
        Command::Train(a) => {
            let out = with_jobs(a.output.jobs, || train::train(&a))??;
            if out.status == train::TrainStatus::AlreadyComplete {
                eprintln!("{} is already complete; nothing to do", out.dir.display());
            }
            println!("{}", out.dir.display());
        }
        Command::Evaluate(a) => println!("{}", with_jobs(a.output.jobs, || evaluate::evaluate(&a))??.display()),
        Command::Scenario(a) => println!("{}", with_jobs(a.output.jobs, || scenario::scenario(&a))??.display()),
        Command::Serve(a) => serve::serve(&a)?,
    }
    Ok(())
}
