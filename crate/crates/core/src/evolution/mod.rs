//! Multi-problem evolutionary search over generated heuristics.

mod config;
mod engine;
mod heuristic;
mod ops;
mod parallel;

pub use config::EvolutionConfig;
pub use engine::{
    run_evolution, Engine, EngineState, EvolutionError, GenerationRecord, HeuristicBundle,
    LrScoreEntry, OperatorRation, ReductionSummary, RefinementEvent, RunResult, CHECKPOINT_FILE,
};
pub use heuristic::{
    evaluate_code, evaluate_fitness, evaluate_instances, BatchReport, EvalStatus, Evaluation,
    Heuristic, InstanceReport, Operator, Origin,
};
pub use ops::{
    allocate_ration, manage_population, population_fingerprint, rank_order, ration_probabilities,
    select_parents, ManageSettings, RationPlan, DUPLICATE_TOLERANCE,
};
pub use parallel::parallel_map;
