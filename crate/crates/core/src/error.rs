use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown configuration id '{0}' (expected A, B or C)")]
    UnknownConfiguration(String),
}

/// Contract violations raised by the environment. These signal caller bugs
/// and are never part of the simulated dynamics.
#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("action shape {found:?} does not match network {expected:?}")]
    ActionShape {
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("order {order} at node {node}, product {product} exceeds reorder_max {max}")]
    OrderOutOfBounds {
        node: usize,
        product: usize,
        order: u32,
        max: u32,
    },
    #[error("transport mode {mode} at node {node}, product {product} out of range (n_modes = {n_modes})")]
    ModeOutOfBounds {
        node: usize,
        product: usize,
        mode: usize,
        n_modes: usize,
    },
    #[error("episode finished: period {t} is past horizon {horizon}")]
    EpisodeOver { t: usize, horizon: usize },
    #[error("invalid disruption: {0}")]
    InvalidDisruption(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("observation has {found} entries, architecture expects {expected}")]
    ObservationLen { found: usize, expected: usize },
    #[error("genome has {found} parameters, architecture expects {expected}")]
    GenomeLen { found: usize, expected: usize },
    #[error("genome parameter {index} is not finite")]
    NonFinite { index: usize },
    #[error("architecture mismatch between genomes")]
    ArchitectureMismatch,
    #[error("architecture does not fit network: {0}")]
    NetworkMismatch(String),
}

/// Failure while evaluating a policy, with the step at which it happened.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("environment error at period {period}: {source}")]
    Env {
        period: usize,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("evaluation failed in generation {generation}, individual {individual}: {source}")]
    Evaluation {
        generation: usize,
        individual: usize,
        #[source]
        source: EvalError,
    },
    #[error("invalid evolution parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Error, PartialEq)]
pub enum HypervolumeError {
    #[error("point {index} does not dominate the reference point")]
    NotDominating { index: usize },
    #[error("point {index} has {found} objectives, reference has {expected}")]
    Dimension {
        index: usize,
        found: usize,
        expected: usize,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("archive is empty")]
    EmptyArchive,
    #[error("weights must be one per objective, nonnegative, and sum to 1 (got {0:?})")]
    Weights(Vec<f64>),
    #[error("switch trigger {trigger} outside horizon {horizon}")]
    Trigger { trigger: usize, horizon: usize },
    #[error("archive has no policy {0}")]
    UnknownPolicy(usize),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("environment error at period {period}: {source}")]
    Step {
        period: usize,
        #[source]
        source: EnvError,
    },
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {found} in {what} (expected {expected})")]
    SchemaVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{0}")]
    Invalid(String),
}
