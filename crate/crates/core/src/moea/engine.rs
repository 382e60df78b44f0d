//! The generational NSGA-II loop.
//!
//! Each generation: tournament selection, SBX + Gaussian mutation to produce
//! `population` offspring, parallel evaluation, then Top-N survival over the
//! union. Every random draw comes from a stream derived from the run seed,
//! the generation and (for evaluations) the individual index, so results do
//! not depend on thread scheduling.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hypervolume::hypervolume_dominating;
use super::selection::{assign_rank_and_crowding, survival_select, tournament_select, EvaluatedIndividual, Population};
use super::variation::{crossover, mutate, VariationParams};
use crate::env::{Network, NetworkConfig, N_OBJECTIVES, OBJECTIVE_NAMES};
use crate::error::{EvalError, EvolveError};
use crate::policy::{Architecture, Genome, DEFAULT_HIDDEN};
use crate::risk::{run_episodes, EvalSettings, FitnessMode, RiskEstimate};
use crate::rng::{derive_seed, domain, stream};
use crate::store::ParetoArchive;

/// Stop early once the first-front hypervolume improves by less than
/// `epsilon` for `window` consecutive generations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub epsilon: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoParams {
    pub population: usize,
    pub generations: usize,
    /// Episodes per fitness evaluation; `None` uses the fitness mode default.
    #[serde(default)]
    pub episodes: Option<usize>,
    /// Episode horizon override; `None` uses the configuration's.
    #[serde(default)]
    pub horizon: Option<usize>,
    pub hidden: Vec<usize>,
    #[serde(flatten)]
    pub variation: VariationParams,
    #[serde(default)]
    pub convergence: Option<Convergence>,
}

impl Default for EvoParams {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 30,
            episodes: None,
            horizon: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            variation: VariationParams::default(),
            convergence: None,
        }
    }
}

impl EvoParams {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if self.population < 2 {
            return Err(EvolveError::Params(format!("population must be at least 2, got {}", self.population)));
        }
        if self.episodes == Some(0) {
            return Err(EvolveError::Params("episodes must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(EvolveError::Params("hidden layers must be non-empty".into()));
        }
        if let Some(c) = self.convergence {
            if c.window == 0 || !(c.epsilon >= 0.0) {
                return Err(EvolveError::Params("convergence needs window >= 1 and epsilon >= 0".into()));
            }
        }
        self.variation.validate().map_err(EvolveError::Params)
    }
}

/// Result of scoring one genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: Vec<f64>,
    pub risk: Option<RiskEstimate>,
}

/// Scores genomes. `seed` is unique per (generation, individual).
pub trait FitnessEvaluator: Sync {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<Evaluation, EvalError>;
}

/// Monte-Carlo evaluation of policy genomes on a network.
#[derive(Debug, Clone)]
pub struct PolicyEvaluator {
    pub net: Arc<Network>,
    pub settings: EvalSettings,
    pub mode: FitnessMode,
}

impl FitnessEvaluator for PolicyEvaluator {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<Evaluation, EvalError> {
        let returns = run_episodes(&self.net, genome, &self.settings, seed)?;
        Ok(match self.mode {
            FitnessMode::Mean => Evaluation { fitness: returns.mean(), risk: None },
            FitnessMode::Cvar { alpha } => {
                let est = RiskEstimate::from_returns(&returns, alpha);
                Evaluation { fitness: est.cvar.clone(), risk: Some(est) }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub generation: usize,
    pub front_sizes: Vec<usize>,
    /// First-front hypervolume against the run's reference point.
    pub hypervolume: f64,
    /// Best value of each objective over the population.
    pub best: Vec<f64>,
}

/// Everything needed to continue a run after generation `population.generation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveState {
    pub population: Population,
    pub initial_front: Vec<Vec<f64>>,
    pub reference_point: Vec<f64>,
    pub metrics: Vec<GenerationMetrics>,
    /// Consecutive generations without enough hypervolume improvement.
    pub stalled: usize,
    pub converged: bool,
}

impl EvolveState {
    pub fn final_front(&self) -> Vec<&EvaluatedIndividual> {
        self.population.front().collect()
    }
}

fn evaluate_all<E: FitnessEvaluator>(
    evaluator: &E,
    genomes: Vec<Genome>,
    seed: u64,
    generation: usize,
) -> Result<Vec<EvaluatedIndividual>, EvolveError> {
    genomes
        .into_par_iter()
        .enumerate()
        .map(|(i, g)| {
            let s = derive_seed(seed, &[domain::EVAL, generation as u64, i as u64]);
            let ev = evaluator.evaluate(&g, s).map_err(|source| EvolveError::Evaluation {
                generation,
                individual: i,
                source,
            })?;
            if let Some(index) = ev.fitness.iter().position(|v| !v.is_finite()) {
                return Err(EvolveError::Evaluation {
                    generation,
                    individual: i,
                    source: EvalError::Invalid(format!("objective {index} is not finite")),
                });
            }
            Ok(EvaluatedIndividual::new(g, ev.fitness, ev.risk))
        })
        .collect()
}

/// A reference point strictly below every initial fitness, padded by a tenth
/// of each objective's spread plus one.
pub fn reference_point<F: AsRef<[f64]>>(fitness: &[F]) -> Vec<f64> {
    let d = fitness.first().map_or(N_OBJECTIVES, |f| f.as_ref().len());
    (0..d)
        .map(|j| {
            let (lo, hi) = fitness
                .iter()
                .map(|f| f.as_ref()[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            lo - 0.1 * (hi - lo) - 1.0
        })
        .collect()
}

fn metrics_for(pop: &Population, fronts: &[Vec<usize>], reference: &[f64]) -> GenerationMetrics {
    let front: Vec<&[f64]> = fronts
        .first()
        .map(|f| f.iter().map(|&i| pop.members[i].fitness.as_slice()).collect())
        .unwrap_or_default();
    let d = reference.len();
    let best = (0..d)
        .map(|j| pop.members.iter().map(|m| m.fitness[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    GenerationMetrics {
        generation: pop.generation,
        front_sizes: fronts.iter().map(Vec::len).collect(),
        hypervolume: hypervolume_dominating(&front, reference),
        best,
    }
}

/// Random initial population, evaluated and ranked (generation 0).
pub fn initialize<E: FitnessEvaluator>(
    evaluator: &E,
    arch: &Architecture,
    params: &EvoParams,
    seed: u64,
) -> Result<EvolveState, EvolveError> {
    params.validate()?;
    let mut rng = stream(seed, &[domain::INIT]);
    let genomes: Vec<Genome> = (0..params.population).map(|_| Genome::init(arch, &mut rng)).collect();
    let mut members = evaluate_all(evaluator, genomes, seed, 0)?;
    let fronts = assign_rank_and_crowding(&mut members);
    let population = Population { generation: 0, members };
    let initial_front: Vec<Vec<f64>> = fronts[0].iter().map(|&i| population.members[i].fitness.clone()).collect();
    let all: Vec<&[f64]> = population.members.iter().map(|m| m.fitness.as_slice()).collect();
    let reference = reference_point(&all);
    let metrics = vec![metrics_for(&population, &fronts, &reference)];
    Ok(EvolveState {
        population,
        initial_front,
        reference_point: reference,
        metrics,
        stalled: 0,
        converged: false,
    })
}

/// Advances `state` by one generation.
pub fn step_generation<E: FitnessEvaluator>(
    evaluator: &E,
    params: &EvoParams,
    seed: u64,
    state: &mut EvolveState,
) -> Result<(), EvolveError> {
    let g = state.population.generation + 1;
    let n = params.population;
    let parents = &state.population.members;
    let mut rng = stream(seed, &[domain::VARIATION, g as u64]);
    let mut offspring = Vec::with_capacity(n + 1);
    while offspring.len() < n {
        let a = tournament_select(parents, &mut rng);
        let b = tournament_select(parents, &mut rng);
        let (c1, c2) = crossover(&parents[a].genome, &parents[b].genome, &params.variation, &mut rng)?;
        offspring.push(mutate(&c1, &params.variation, &mut rng)?);
        offspring.push(mutate(&c2, &params.variation, &mut rng)?);
    }
    offspring.truncate(n);
    let children = evaluate_all(evaluator, offspring, seed, g)?;

    let mut combined = std::mem::take(&mut state.population.members);
    combined.extend(children);
    let mut members = survival_select(combined, n);
    // Ranks and crowding of the survivors among themselves.
    let fronts = assign_rank_and_crowding(&mut members);
    state.population = Population { generation: g, members };
    let m = metrics_for(&state.population, &fronts, &state.reference_point);

    if let Some(c) = params.convergence {
        let prev = state.metrics.last().map_or(0.0, |p| p.hypervolume);
        if m.hypervolume - prev < c.epsilon {
            state.stalled += 1;
        } else {
            state.stalled = 0;
        }
        state.converged = state.stalled >= c.window;
    }
    state.metrics.push(m);
    Ok(())
}

/// Runs (or continues) NSGA-II until `params.generations` or convergence.
/// `on_generation` sees the state after every completed generation,
/// including the initial one.
pub fn run_nsga2<E: FitnessEvaluator>(
    evaluator: &E,
    arch: &Architecture,
    params: &EvoParams,
    seed: u64,
    resume: Option<EvolveState>,
    mut on_generation: impl FnMut(&EvolveState),
) -> Result<EvolveState, EvolveError> {
    params.validate()?;
    let mut state = match resume {
        Some(s) => s,
        None => {
            let s = initialize(evaluator, arch, params, seed)?;
            on_generation(&s);
            s
        }
    };
    while state.population.generation < params.generations && !state.converged {
        step_generation(evaluator, params, seed, &mut state)?;
        on_generation(&state);
    }
    Ok(state)
}

/// Everything `evolve` needs besides the seed.
#[derive(Debug, Clone)]
pub struct TrainingSetup {
    pub config: NetworkConfig,
    pub params: EvoParams,
    pub mode: FitnessMode,
}

impl TrainingSetup {
    pub fn network(&self) -> Result<Arc<Network>, EvolveError> {
        let net = Network::new(self.config.clone()).map_err(|e| EvolveError::Params(e.to_string()))?;
        Ok(Arc::new(match self.params.horizon {
            Some(h) => net.with_horizon(h),
            None => net,
        }))
    }

    pub fn evaluator(&self) -> Result<PolicyEvaluator, EvolveError> {
        self.mode
            .validate()
            .map_err(|e| EvolveError::Params(e.to_string()))?;
        let net = self.network()?;
        let episodes = self.params.episodes.unwrap_or_else(|| self.mode.default_episodes());
        Ok(PolicyEvaluator {
            settings: EvalSettings::for_network(&net, episodes),
            net,
            mode: self.mode,
        })
    }

    pub fn architecture(&self) -> Result<Architecture, EvolveError> {
        Ok(Architecture::for_network(self.network()?.as_ref(), &self.params.hidden))
    }
}

/// Trains a Pareto set of policies. Returns the archive (non-dominated
/// members of the final population) and per-generation metrics.
pub fn evolve(
    config: &NetworkConfig,
    params: &EvoParams,
    mode: FitnessMode,
    seed: u64,
) -> Result<(ParetoArchive, Vec<GenerationMetrics>), EvolveError> {
    let setup = TrainingSetup {
        config: config.clone(),
        params: params.clone(),
        mode,
    };
    let evaluator = setup.evaluator()?;
    let arch = setup.architecture()?;
    let state = run_nsga2(&evaluator, &arch, params, seed, None, |_| {})?;
    let archive = ParetoArchive::from_state(&setup, seed, &state);
    Ok((archive, state.metrics))
}

/// Writes one CSV row per generation. Front sizes are `;`-separated.
pub fn write_metrics_csv<W: Write>(metrics: &[GenerationMetrics], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["generation".to_string(), "front_sizes".into(), "hypervolume".into()];
    header.extend(OBJECTIVE_NAMES.iter().map(|n| format!("best_{n}")));
    w.write_record(&header)?;
    for m in metrics {
        let mut row = vec![
            m.generation.to_string(),
            m.front_sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            m.hypervolume.to_string(),
        ];
        row.extend(m.best.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
