//! NSGA-II over policy genomes.

mod engine;
mod hypervolume;
mod ranking;
mod selection;
mod variation;

pub use engine::{
    evolve, initialize, reference_point, run_nsga2, step_generation, write_metrics_csv, Convergence,
    Evaluation, EvoParams, EvolveState, FitnessEvaluator, GenerationMetrics, PolicyEvaluator,
    TrainingSetup,
};
pub use hypervolume::{hypervolume, hypervolume_dominating};
pub use ranking::{crowding_distance, dominates, non_dominated_sort};
pub use selection::{
    assign_rank_and_crowding, crowded_cmp, survival_select, tournament_select, EvaluatedIndividual,
    Population,
};
pub use variation::{crossover, gaussian_mutation, mutate, sbx, sbx_beta, VariationParams};
