use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] morse::ConfigError),
    #[error(transparent)]
    Store(#[from] morse::StoreError),
    #[error(transparent)]
    Evolve(#[from] morse::EvolveError),
    #[error(transparent)]
    Eval(#[from] morse::EvalError),
    #[error(transparent)]
    Scenario(#[from] morse::ScenarioError),
    #[error("{} already holds a completed run; pick another --out", .0.display())]
    AlreadyComplete(PathBuf),
    #[error("{} holds an unfinished run; pass --resume to continue it", .0.display())]
    Incomplete(PathBuf),
    #[error("{} does not match the hash recorded in its manifest", .0.display())]
    HashMismatch(PathBuf),
    #[error("archive has no policy with id {0}")]
    UnknownPolicy(usize),
    #[error("csv output failed: {0}")]
    Csv(String),
}
