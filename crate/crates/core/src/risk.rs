//! Monte-Carlo policy evaluation: discounted rollouts, mean and CVaR fitness,
//! and the VaR/CVaR tail estimators.
//!
//! Every objective is a return to maximize, so the risky tail is always the
//! low end of the sample.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, InventoryEnv, Network, N_OBJECTIVES, OBJECTIVE_NAMES};
use crate::error::EvalError;
use crate::policy::{Genome, GenomePolicy, Policy};
use crate::rng::{derive_seed, domain, stream, SimRng};

/// How a policy's episodic returns are reduced to a fitness vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessMode {
    Mean,
    Cvar { alpha: f64 },
}

impl FitnessMode {
    pub fn default_episodes(&self) -> usize {
        match self {
            FitnessMode::Mean => 5,
            FitnessMode::Cvar { .. } => 500,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match *self {
            FitnessMode::Mean => Ok(()),
            FitnessMode::Cvar { alpha } => check_alpha(alpha),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), EvalError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EvalError::Invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Environment and policy generators for period `t` of an episode.
///
/// Deriving both from `(episode_seed, t)` instead of threading one generator
/// keeps demand and lead-time draws aligned across runs that swap policies
/// mid-episode.
pub fn period_rngs(episode_seed: u64, t: usize) -> (SimRng, SimRng) {
    (
        stream(episode_seed, &[domain::ENV, t as u64]),
        stream(episode_seed, &[domain::POLICY, t as u64]),
    )
}

/// Seed of episode `index` under a base seed.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[domain::EPISODE, index as u64])
}

/// Runs one episode over periods `0..=t_tot` and returns the discounted
/// return per objective.
pub fn rollout_with<E, P>(
    env: &mut E,
    policy: &P,
    t_tot: usize,
    gamma: f64,
    episode_seed: u64,
) -> Result<[f64; N_OBJECTIVES], EvalError>
where
    E: Environment,
    P: Policy<Action = E::Action>,
{
    env.reset(&mut stream(episode_seed, &[domain::ENV, u64::MAX]));
    let mut ret = [0.0; N_OBJECTIVES];
    let mut obs = Vec::new();
    let mut discount = 1.0;
    for t in 0..=t_tot {
        let (mut env_rng, mut pol_rng) = period_rngs(episode_seed, t);
        obs.clear();
        env.observe_into(&mut obs);
        let action = policy.act(&obs, &mut pol_rng)?;
        let r = env
            .step(&action, &mut env_rng)
            .map_err(|source| EvalError::Env { period: t, source })?;
        for (acc, v) in ret.iter_mut().zip(r.to_array()) {
            *acc += discount * v;
        }
        discount *= gamma;
    }
    Ok(ret)
}

/// Discounted return of `genome` on `net` over `t_tot + 1` periods.
pub fn rollout(
    net: &Arc<Network>,
    genome: &Genome,
    t_tot: usize,
    gamma: f64,
    episode_seed: u64,
) -> Result<[f64; N_OBJECTIVES], EvalError> {
    let net = if net.horizon() == t_tot {
        Arc::clone(net)
    } else {
        Arc::new(net.with_horizon(t_tot))
    };
    let policy = GenomePolicy::new(genome, &net)?;
    let mut env = InventoryEnv::new(Arc::clone(&net), &mut stream(episode_seed, &[]));
    rollout_with(&mut env, &policy, t_tot, gamma, episode_seed)
}

/// Episodic returns, one row per episode, in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturns {
    pub seeds: Vec<u64>,
    pub returns: Vec<[f64; N_OBJECTIVES]>,
}

impl EpisodeReturns {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Samples of one objective across episodes.
    pub fn objective(&self, j: usize) -> Vec<f64> {
        self.returns.iter().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.returns.len() as f64;
        (0..N_OBJECTIVES)
            .map(|j| self.returns.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }

    /// Writes one row per episode: `episode,profit,neg_emissions,neg_lead_time`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once("episode").chain(OBJECTIVE_NAMES))?;
        for (e, row) in self.returns.iter().enumerate() {
            w.write_record(std::iter::once(e.to_string()).chain(row.iter().map(f64::to_string)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Common evaluation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    pub horizon: usize,
    pub gamma: f64,
}

impl EvalSettings {
    pub fn for_network(net: &Network, episodes: usize) -> Self {
        Self {
            episodes,
            horizon: net.horizon(),
            gamma: net.config().discount,
        }
    }
}

/// Runs `settings.episodes` independent episodes (in parallel) with seeds
/// `episode_seed(seed, 0..n)`. Results do not depend on scheduling.
pub fn run_episodes(
    net: &Arc<Network>,
    genome: &Genome,
    settings: &EvalSettings,
    seed: u64,
) -> Result<EpisodeReturns, EvalError> {
    if settings.episodes == 0 {
        return Err(EvalError::Invalid("at least one episode is required".into()));
    }
    let net = if net.horizon() == settings.horizon {
        Arc::clone(net)
    } else {
        Arc::new(net.with_horizon(settings.horizon))
    };
    GenomePolicy::new(genome, &net)?;
    let seeds: Vec<u64> = (0..settings.episodes).map(|i| episode_seed(seed, i)).collect();
    let returns = seeds
        .par_iter()
        .map(|&s| rollout(&net, genome, settings.horizon, settings.gamma, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EpisodeReturns { seeds, returns })
}

pub fn evaluate_mean(
    net: &Arc<Network>,
    genome: &Genome,
    settings: &EvalSettings,
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    Ok(run_episodes(net, genome, settings, seed)?.mean())
}

/// CVaR fitness plus the full tail summary.
pub fn evaluate_cvar(
    net: &Arc<Network>,
    genome: &Genome,
    settings: &EvalSettings,
    alpha: f64,
    seed: u64,
) -> Result<(Vec<f64>, RiskEstimate), EvalError> {
    check_alpha(alpha)?;
    let returns = run_episodes(net, genome, settings, seed)?;
    let est = RiskEstimate::from_returns(&returns, alpha);
    Ok((est.cvar.clone(), est))
}

/// Number of samples in the lower `1 - alpha` tail: `ceil(n (1 - alpha))`,
/// at least one and at most `n`.
pub fn tail_size(n: usize, alpha: f64) -> usize {
    // Guard against 10 * (1 - 0.9) = 1.0000000000000009 rounding up to 2.
    let k = (n as f64 * (1.0 - alpha) - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    assert!(!samples.is_empty(), "risk estimate of an empty sample");
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Value at risk: the `ceil(n (1 - alpha))`-th smallest sample. Input order
/// does not matter. Panics on an empty sample.
pub fn var_estimate(samples: &[f64], alpha: f64) -> f64 {
    let v = sorted(samples);
    v[tail_size(v.len(), alpha) - 1]
}

/// Conditional value at risk: mean of the `ceil(n (1 - alpha))` smallest
/// samples. Panics on an empty sample.
pub fn cvar_estimate(samples: &[f64], alpha: f64) -> f64 {
    let v = sorted(samples);
    let k = tail_size(v.len(), alpha);
    v[..k].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub alpha: f64,
    pub samples: usize,
    pub var: Vec<f64>,
    pub cvar: Vec<f64>,
    pub mean: Vec<f64>,
}

impl RiskEstimate {
    pub fn from_returns(returns: &EpisodeReturns, alpha: f64) -> Self {
        let cols: Vec<Vec<f64>> = (0..N_OBJECTIVES).map(|j| returns.objective(j)).collect();
        Self {
            alpha,
            samples: returns.len(),
            var: cols.iter().map(|c| var_estimate(c, alpha)).collect(),
            cvar: cols.iter().map(|c| cvar_estimate(c, alpha)).collect(),
            mean: returns.mean(),
        }
    }
}
