use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "morse", version, about = "Evolve, evaluate and steer multi-objective inventory policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a Pareto archive of policies.
    Train(TrainArgs),
    /// Monte-Carlo return distributions and risk estimates for archived policies.
    Evaluate(EvaluateArgs),
    /// Switching versus static arm under a scripted disruption.
    Scenario(ScenarioArgs),
    /// Host the live session control service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory. Defaults to a per-command directory under $MORSE_OUT (or ./runs).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel rollouts (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Network configuration JSON file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled configuration A, B or C (default A).
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    #[arg(long, default_value_t = 30)]
    pub generations: usize,
    /// Episodes per fitness evaluation (default 5 for mean, 500 for CVaR fitness).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Last simulated period during training (default: the configuration's horizon).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
    /// Train on CVaR at this level instead of the mean return.
    #[arg(long)]
    pub risk_alpha: Option<f64>,
    /// Per-cell probability of a retail demand spike (0.01 for the standard heavy-tailed variant).
    #[arg(long)]
    pub spike_probability: Option<f64>,
    /// Demand-rate multiplier during a spike (default 20).
    #[arg(long, requires = "spike_probability")]
    pub spike_multiplier: Option<f64>,
    /// Stop early once hypervolume improves by less than this for `--convergence-window` generations.
    #[arg(long)]
    pub convergence_epsilon: Option<f64>,
    #[arg(long, default_value_t = 5, requires = "convergence_epsilon")]
    pub convergence_window: usize,
    /// Continue the run in the output directory with its recorded settings.
    #[arg(long)]
    pub resume: bool,
    /// No per-generation progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Archive written by `train`.
    #[arg(long)]
    pub archive: PathBuf,
    /// Policy id to evaluate; repeat for several (default: all).
    #[arg(long = "policy")]
    pub policies: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0.9)]
    pub risk_alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Last simulated period (default: the horizon the archive was trained with).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisruptionArg {
    EmissionTax,
    CostSurge,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Configuration id the archive was trained on: A, B or C.
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long, value_enum, default_value = "emission-tax")]
    pub disruption: DisruptionArg,
    #[arg(long, default_value_t = 0.5)]
    pub tax_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tax_threshold: f64,
    #[arg(long, default_value_t = 1.1)]
    pub cost_multiplier: f64,
    /// First disrupted period (default: the trigger period).
    #[arg(long)]
    pub disruption_start: Option<usize>,
    /// Disrupted periods (default: until the end of the run).
    #[arg(long)]
    pub disruption_duration: Option<usize>,
    /// Period at which the switching arm re-selects its policy.
    #[arg(long, default_value_t = 200, conflicts_with = "on_disruption")]
    pub trigger: usize,
    /// Switch at the first disrupted period instead of `--trigger`.
    #[arg(long)]
    pub on_disruption: bool,
    /// Number of simulated periods.
    #[arg(long, default_value_t = 400)]
    pub horizon: usize,
    /// Replication seeds 0..N.
    #[arg(long, default_value_t = 10, conflicts_with = "seeds")]
    pub replications: u64,
    /// Explicit replication seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Weights selecting the starting policy (default uniform).
    #[arg(long, value_delimiter = ',')]
    pub initial_weights: Vec<f64>,
    /// Weights selecting the post-trigger policy (default: preset for the disruption).
    #[arg(long, value_delimiter = ',')]
    pub switch_weights: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Archive to offer, as NAME=PATH or PATH (named after the file stem). Repeatable.
    #[arg(long = "archive")]
    pub archives: Vec<String>,
}
