//! Problem definitions for the six supported combinatorial optimization
//! problems: instances, solutions, objectives, feasibility checks,
//! generators, dataset files, TSPLIB ingestion, classical baselines and an
//! exhaustive oracle for tiny instances.
//!
//! Every objective is oriented so that larger is better: minimization
//! problems report the negated cost.

pub(crate) mod baseline;
mod dataset;
mod exact;
mod gap;
mod generate;
mod instance;
pub(crate) mod objective;
pub(crate) mod online;
mod solution;
mod tsplib;
mod validate;

pub use baseline::{baseline_solve, Baseline};
pub use dataset::{Dataset, DatasetHeader, DatasetMetadata};
pub use exact::{brute_force_optimum, BRUTE_FORCE_LIMIT_ROUTING, BRUTE_FORCE_LIMIT_SUBSET};
pub use gap::{bin_lower_bound, optimality_gap};
pub use generate::{generate_instances, GeneratorParams, SizeDistribution};
pub use instance::{
    euclidean_matrix, BppInstance, CvrpInstance, Instance, KpInstance, MkpInstance, ObppInstance,
    TspInstance,
};
pub use objective::{mean_objective, objective};
pub use online::{simulate_online_packing, PackingScorer};
pub use solution::Solution;
pub use tsplib::{parse_tsplib, TsplibFile};
pub use validate::{validate, ValidationReport, Violation, ViolationCode};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Relative slack used by capacity checks so that sums accumulated in a
/// different order than the heuristic used do not flip feasibility.
pub(crate) const CAPACITY_TOLERANCE: f64 = 1e-9;

pub(crate) fn fits(load: f64, capacity: f64) -> bool {
    load <= capacity + CAPACITY_TOLERANCE * capacity.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopKind {
    Tsp,
    Cvrp,
    Bpp,
    Obpp,
    Kp,
    Mkp,
}

impl CopKind {
    pub const ALL: [CopKind; 6] = [
        CopKind::Tsp,
        CopKind::Cvrp,
        CopKind::Bpp,
        CopKind::Obpp,
        CopKind::Kp,
        CopKind::Mkp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CopKind::Tsp => "tsp",
            CopKind::Cvrp => "cvrp",
            CopKind::Bpp => "bpp",
            CopKind::Obpp => "obpp",
            CopKind::Kp => "kp",
            CopKind::Mkp => "mkp",
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            CopKind::Tsp | CopKind::Cvrp | CopKind::Bpp | CopKind::Obpp => Sense::Minimize,
            CopKind::Kp | CopKind::Mkp => Sense::Maximize,
        }
    }
}

impl fmt::Display for CopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopKind {
    type Err = CopError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CopKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CopError::UnknownKind(s.to_string()))
    }
}

/// Direction of the underlying cost. Objectives are always reported so that
/// larger is better; this only tells whether they were negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, thiserror::Error)]
pub enum CopError {
    #[error("unknown problem kind `{0}`")]
    UnknownKind(String),
    #[error("kind mismatch: instance is {instance}, solution is {solution}")]
    KindMismatch { instance: CopKind, solution: CopKind },
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("instance too large for exhaustive search ({size} > {limit})")]
    TooLarge { size: usize, limit: usize },
    #[error("baseline {baseline} does not apply to {kind}")]
    IncompatibleBaseline { baseline: Baseline, kind: CopKind },
    #[error("scorer failure: {0}")]
    Scorer(String),
    #[error("reference must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("TSPLIB: {0}")]
    Tsplib(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
