//! Bundled network configurations, disruption scenarios and Pareto policy
//! switching.
//!
//! A scenario runs two arms over the same seed: a static arm that keeps the
//! policy chosen before the disruption, and a switching arm that re-selects a
//! policy from the archive at the trigger period.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Disruption, DisruptionKind, Network, NetworkConfig, SimState, Transition, N_OBJECTIVES};
use crate::error::{ConfigError, ScenarioError};
use crate::policy::{Genome, GenomePolicy, Policy};
use crate::risk::period_rngs;
use crate::store::ParetoArchive;

const CONFIG_A: &str = include_str!("../configs/configuration_a.json");
const CONFIG_B: &str = include_str!("../configs/configuration_b.json");
const CONFIG_C: &str = include_str!("../configs/configuration_c.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConfigId {
    A,
    B,
    C,
}

impl FromStr for ConfigId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ConfigId::A),
            "B" => Ok(ConfigId::B),
            "C" => Ok(ConfigId::C),
            _ => Err(ConfigError::UnknownConfiguration(s.to_string())),
        }
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigId::A => "A",
            ConfigId::B => "B",
            ConfigId::C => "C",
        })
    }
}

/// A: three-node chain with seasonal demand. B: same chain, stationary
/// Poisson demand. C: five-node chain, stationary demand. All two products.
pub fn build_configuration(id: ConfigId) -> NetworkConfig {
    let text = match id {
        ConfigId::A => CONFIG_A,
        ConfigId::B => CONFIG_B,
        ConfigId::C => CONFIG_C,
    };
    NetworkConfig::from_json(text).expect("bundled configuration is valid")
}

/// Looks up a bundled configuration by name (`A`, `B` or `C`).
pub fn configuration_by_name(name: &str) -> Result<NetworkConfig, ConfigError> {
    Ok(build_configuration(name.parse()?))
}

/// Spike probability of the heavy-tailed demand variant.
pub const DEFAULT_SPIKE_PROBABILITY: f64 = 0.01;
/// Spike multiplier of the heavy-tailed demand variant. Rare, large spikes
/// make the profit-optimal and tail-optimal safety stock differ.
pub const DEFAULT_SPIKE_MULTIPLIER: f64 = 20.0;

/// Adds rare demand spikes: each retail cell independently multiplies its
/// Poisson rate by `multiplier` with probability `probability`.
pub fn with_demand_spikes(mut cfg: NetworkConfig, probability: f64, multiplier: f64) -> NetworkConfig {
    cfg.demand.spike_probability = probability;
    cfg.demand.spike_multiplier = multiplier;
    cfg.name = format!("{}-spiky", cfg.name);
    cfg
}

/// Weighted sum of min-max normalized fitnesses; returns the id of the best
/// policy, lowest id on ties. Objectives that are constant across the table
/// contribute nothing.
pub fn select_from_table(table: &[(usize, &[f64])], weights: &[f64]) -> Result<usize, ScenarioError> {
    if table.is_empty() {
        return Err(ScenarioError::EmptyArchive);
    }
    let d = table[0].1.len();
    let sum: f64 = weights.iter().sum();
    if weights.len() != d || weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(ScenarioError::Weights(weights.to_vec()));
    }
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            table.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, f)| {
                (lo.min(f[j]), hi.max(f[j]))
            })
        })
        .collect();
    let score = |f: &[f64]| -> f64 {
        (0..d)
            .map(|j| {
                let (lo, hi) = bounds[j];
                if hi > lo {
                    weights[j] * (f[j] - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut best: Option<(usize, f64)> = None;
    for &(id, f) in table {
        let s = score(f);
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    Ok(best.expect("non-empty").0)
}

pub fn select_policy(archive: &ParetoArchive, weights: &[f64]) -> Result<usize, ScenarioError> {
    select_from_table(&archive.fitness_table(), weights)
}

pub fn uniform_weights() -> Vec<f64> {
    vec![1.0 / N_OBJECTIVES as f64; N_OBJECTIVES]
}

/// Default switch weights per disruption type.
pub fn preset_weights(kind: &DisruptionKind) -> Vec<f64> {
    match kind {
        DisruptionKind::EmissionTax { .. } => vec![0.2, 0.7, 0.1],
        DisruptionKind::CostSurge { .. } => vec![0.7, 0.2, 0.1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchTrigger {
    AtPeriod { period: usize },
    /// At the first period of the disruption.
    OnDisruption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub configuration: ConfigId,
    #[serde(default)]
    pub disruption: Option<Disruption>,
    /// Weights that pick the policy both arms start with.
    pub initial_weights: Vec<f64>,
    /// Weights for the switching arm; `None` uses the disruption preset.
    #[serde(default)]
    pub switch_weights: Option<Vec<f64>>,
    pub trigger: SwitchTrigger,
    /// Number of simulated periods.
    pub horizon: usize,
    pub seeds: Vec<u64>,
}

impl ScenarioSpec {
    /// Emission tax (or cost surge) from period 200 of a 400-period run.
    pub fn new(configuration: ConfigId, disruption: Option<Disruption>) -> Self {
        Self {
            configuration,
            disruption,
            initial_weights: uniform_weights(),
            switch_weights: None,
            trigger: SwitchTrigger::AtPeriod { period: 200 },
            horizon: 400,
            seeds: (0..10).collect(),
        }
    }

    pub fn trigger_period(&self) -> usize {
        match (self.trigger, &self.disruption) {
            (SwitchTrigger::AtPeriod { period }, _) => period,
            (SwitchTrigger::OnDisruption, Some(d)) => d.start,
            (SwitchTrigger::OnDisruption, None) => self.horizon,
        }
    }

    pub fn switch_weights(&self) -> Vec<f64> {
        match (&self.switch_weights, &self.disruption) {
            (Some(w), _) => w.clone(),
            (None, Some(d)) => preset_weights(&d.kind),
            (None, None) => self.initial_weights.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let trigger = self.trigger_period();
        if self.horizon == 0 || trigger > self.horizon {
            return Err(ScenarioError::Trigger { trigger, horizon: self.horizon });
        }
        if let Some(d) = &self.disruption {
            d.validate()?;
        }
        Ok(())
    }
}

/// One simulated period as seen by the scenario and session layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub policy_id: usize,
    pub profit: f64,
    pub emissions: f64,
    pub lead_time: f64,
    pub profit_cum: f64,
    pub emissions_cum: f64,
    pub disruption_active: bool,
}

/// A live episode driven one period at a time by archive policies. Random
/// draws for period `t` come from [`period_rngs`]`(seed, t)`, the same
/// schedule [`crate::risk::rollout`] uses.
#[derive(Debug, Clone)]
pub struct Simulation {
    net: Arc<Network>,
    genomes: Arc<Vec<(usize, Genome)>>,
    state: SimState,
    disruptions: Vec<Disruption>,
    seed: u64,
    profit_cum: f64,
    emissions_cum: f64,
}

impl Simulation {
    /// `net` must already carry the intended horizon.
    pub fn new(net: Arc<Network>, archive: &ParetoArchive, seed: u64) -> Result<Self, ScenarioError> {
        if archive.is_empty() {
            return Err(ScenarioError::EmptyArchive);
        }
        archive.architecture.check_network(&net)?;
        let genomes = archive
            .policies
            .iter()
            .map(|p| Ok((p.id, Genome::decode(&archive.architecture, p.params.clone())?)))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let state = SimState::reset(&net, &mut crate::rng::stream(seed, &[]));
        Ok(Self {
            net,
            genomes: Arc::new(genomes),
            state,
            disruptions: Vec::new(),
            seed,
            profit_cum: 0.0,
            emissions_cum: 0.0,
        })
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn period(&self) -> usize {
        self.state.t
    }

    /// True once every period up to the horizon has been simulated.
    pub fn finished(&self) -> bool {
        self.state.t > self.net.horizon()
    }

    pub fn disruptions(&self) -> &[Disruption] {
        &self.disruptions
    }

    pub fn has_policy(&self, id: usize) -> bool {
        self.genomes.iter().any(|(i, _)| *i == id)
    }

    pub fn inject(&mut self, d: Disruption) -> Result<(), ScenarioError> {
        d.validate()?;
        self.disruptions.push(d);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.state = SimState::reset(&self.net, &mut crate::rng::stream(self.seed, &[]));
        self.disruptions.clear();
        self.profit_cum = 0.0;
        self.emissions_cum = 0.0;
    }

    /// Simulates one period under policy `policy_id`.
    pub fn step(&mut self, policy_id: usize) -> Result<(PeriodRecord, Transition), ScenarioError> {
        let t = self.state.t;
        let genome = &self
            .genomes
            .iter()
            .find(|(i, _)| *i == policy_id)
            .ok_or(ScenarioError::UnknownPolicy(policy_id))?
            .1;
        let policy = GenomePolicy::new(genome, &self.net)?;
        let (mut env_rng, mut pol_rng) = period_rngs(self.seed, t);
        let obs = self.state.observe(&self.net);
        let actions = policy.act(&obs, &mut pol_rng)?;
        let tr = self
            .state
            .step(&self.net, &actions, &self.disruptions, &mut env_rng)
            .map_err(|source| ScenarioError::Step { period: t, source })?;
        let (profit, emissions, lead_time) = (tr.reward.profit, tr.reward.emissions(), tr.reward.lead_time());
        self.profit_cum += profit;
        self.emissions_cum += emissions;
        let rec = PeriodRecord {
            period: t,
            policy_id,
            profit,
            emissions,
            lead_time,
            profit_cum: self.profit_cum,
            emissions_cum: self.emissions_cum,
            disruption_active: tr.disruption_active,
        };
        Ok((rec, tr))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub rows: Vec<PeriodRecord>,
}

impl ScenarioTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn policy_series(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.policy_id).collect()
    }

    /// `period,policy_id,profit_cum,emissions_cum,lead_time,disruption_active`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["period", "policy_id", "profit_cum", "emissions_cum", "lead_time", "disruption_active"])?;
        for r in &self.rows {
            w.write_record([
                r.period.to_string(),
                r.policy_id.to_string(),
                r.profit_cum.to_string(),
                r.emissions_cum.to_string(),
                r.lead_time.to_string(),
                r.disruption_active.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_arm(
    net: &Arc<Network>,
    archive: &ParetoArchive,
    disruption: Option<&Disruption>,
    seed: u64,
    policy_at: impl Fn(usize) -> usize,
) -> Result<ScenarioTrace, ScenarioError> {
    let mut sim = Simulation::new(Arc::clone(net), archive, seed)?;
    if let Some(d) = disruption {
        sim.inject(d.clone())?;
    }
    let mut trace = ScenarioTrace::default();
    while !sim.finished() {
        let (rec, _) = sim.step(policy_at(sim.period()))?;
        trace.rows.push(rec);
    }
    Ok(trace)
}

/// The two arms of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub seed: u64,
    pub initial_policy: usize,
    pub switch_policy: usize,
    pub switching: ScenarioTrace,
    pub static_arm: ScenarioTrace,
}

/// Runs both arms with the same seed. The archive must have been trained on
/// the scenario's configuration; its embedded network is used with the scenario's
/// horizon.
pub fn run_scenario(spec: &ScenarioSpec, archive: &ParetoArchive, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    spec.validate()?;
    let net = Arc::new(archive.network()?.with_horizon(spec.horizon - 1));
    let initial = select_policy(archive, &spec.initial_weights)?;
    let target = select_policy(archive, &spec.switch_weights())?;
    let trigger = spec.trigger_period();
    let d = spec.disruption.as_ref();
    let switching = run_arm(&net, archive, d, seed, |t| if t >= trigger { target } else { initial })?;
    let static_arm = run_arm(&net, archive, d, seed, |_| initial)?;
    Ok(ScenarioOutcome {
        seed,
        initial_policy: initial,
        switch_policy: target,
        switching,
        static_arm,
    })
}

/// One outcome per seed in `spec.seeds`, in that order.
pub fn run_replications(spec: &ScenarioSpec, archive: &ParetoArchive) -> Result<Vec<ScenarioOutcome>, ScenarioError> {
    spec.seeds.par_iter().map(|&s| run_scenario(spec, archive, s)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseMeans {
    pub periods: usize,
    pub profit: f64,
    pub emissions: f64,
    pub lead_time: f64,
}

impl PhaseMeans {
    fn of(rows: &[PeriodRecord]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        Self {
            periods: rows.len(),
            profit: rows.iter().map(|r| r.profit).sum::<f64>() / n,
            emissions: rows.iter().map(|r| r.emissions).sum::<f64>() / n,
            lead_time: rows.iter().map(|r| r.lead_time).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub periods: usize,
    pub profit_cum: f64,
    pub emissions_cum: f64,
    pub lead_time_total: f64,
    pub pre_trigger: PhaseMeans,
    pub post_trigger: PhaseMeans,
}

impl ArmSummary {
    pub fn of(trace: &ScenarioTrace, trigger: usize) -> Self {
        let split = trace.rows.partition_point(|r| r.period < trigger);
        let last = trace.rows.last();
        Self {
            periods: trace.len(),
            profit_cum: last.map_or(0.0, |r| r.profit_cum),
            emissions_cum: last.map_or(0.0, |r| r.emissions_cum),
            lead_time_total: trace.rows.iter().map(|r| r.lead_time).sum(),
            pre_trigger: PhaseMeans::of(&trace.rows[..split]),
            post_trigger: PhaseMeans::of(&trace.rows[split..]),
        }
    }
}

/// `switching - static` for each headline metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmDelta {
    pub profit_cum: f64,
    pub emissions_cum: f64,
    pub lead_time_total: f64,
    pub post_trigger_profit: f64,
    pub post_trigger_emissions: f64,
    pub post_trigger_lead_time: f64,
}

impl ArmDelta {
    pub fn between(a: &ArmSummary, b: &ArmSummary) -> Self {
        Self {
            profit_cum: a.profit_cum - b.profit_cum,
            emissions_cum: a.emissions_cum - b.emissions_cum,
            lead_time_total: a.lead_time_total - b.lead_time_total,
            post_trigger_profit: a.post_trigger.profit - b.post_trigger.profit,
            post_trigger_emissions: a.post_trigger.emissions - b.post_trigger.emissions,
            post_trigger_lead_time: a.post_trigger.lead_time - b.post_trigger.lead_time,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub trigger_period: usize,
    pub switching: ArmSummary,
    pub static_arm: ArmSummary,
    pub delta: ArmDelta,
}

pub fn summarize(switching: &ScenarioTrace, static_arm: &ScenarioTrace, trigger_period: usize) -> ScenarioReport {
    let s = ArmSummary::of(switching, trigger_period);
    let t = ArmSummary::of(static_arm, trigger_period);
    ScenarioReport {
        trigger_period,
        switching: s,
        static_arm: t,
        delta: ArmDelta::between(&s, &t),
    }
}
