use serde::{Deserialize, Serialize};

use crate::cop::CopKind;

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_workers() -> usize {
    1
}

/// Search settings. Defaults follow the published setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// N: population size and offspring per operator per generation.
    pub population_size: usize,
    /// M: reductions kept active.
    pub active_reductions: usize,
    /// M_init: reduced problems requested up front.
    pub candidate_reductions: usize,
    /// l: heuristics averaged into a reduction's score.
    pub top_l: usize,
    /// T: generations without improvement before refinement.
    pub stagnation_threshold: u32,
    /// G.
    pub generations: usize,
    /// Budget per heuristic for the whole dataset.
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default)]
    pub seed: u64,
    /// Extra attempts when a model answer cannot be used.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Concurrent sandbox evaluations (and live model requests).
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl EvolutionConfig {
    pub fn for_kind(kind: CopKind) -> Self {
        let population_size = match kind {
            CopKind::Tsp | CopKind::Kp => 10,
            CopKind::Cvrp | CopKind::Bpp | CopKind::Obpp | CopKind::Mkp => 20,
        };
        Self {
            population_size,
            active_reductions: 3,
            candidate_reductions: 10,
            top_l: 3,
            stagnation_threshold: 3,
            generations: 20,
            timeout_seconds: default_timeout(),
            seed: 0,
            max_retries: default_retries(),
            workers: default_workers(),
        }
    }

    /// Heuristics requested per reduction at initialization: ceil(N/M).
    pub fn initial_per_reduction(&self) -> usize {
        self.population_size.div_ceil(self.active_reductions.max(1))
    }

    pub fn check(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.population_size == 0 {
            problems.push("population_size must be at least 1".to_string());
        }
        if self.active_reductions == 0 {
            problems.push("active_reductions must be at least 1".to_string());
        }
        if self.candidate_reductions < self.active_reductions {
            problems.push(format!(
                "candidate_reductions ({}) must be at least active_reductions ({})",
                self.candidate_reductions, self.active_reductions
            ));
        }
        if self.top_l == 0 {
            problems.push("top_l must be at least 1".to_string());
        }
        if self.stagnation_threshold == 0 {
            problems.push("stagnation_threshold must be at least 1".to_string());
        }
        if !(self.timeout_seconds > 0.0) {
            problems.push("timeout_seconds must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}
