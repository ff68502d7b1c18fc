use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ops::{allocate_ration, manage_population, population_fingerprint, select_parents, ManageSettings, RationPlan};
use super::{evaluate_code, parallel_map, EvolutionConfig, Evaluation, Heuristic, Operator, Origin};
use crate::cop::{CopError, CopKind, Dataset};
use crate::llm::{extract_braced_description, extract_code, AskError, LlmClient, LlmError};
use crate::prompts::{
    crossover_prompt, init_prompt, mutation_prompt, reduction_prompt, with_feedback, ParentView,
    ProblemDescription, ReductionTemplate, SOLVE_ENTRY,
};
use crate::reduction::{
    compute_lr_score, propose_candidate_problems, refine_reduction, select_initial_lrs,
    synthesize_code_template, LanguageReduction, LrScore, LrStatus, ReductionError,
    RefineSettings, RefinementOutcome,
};
use crate::sandbox::{Sandbox, SandboxError};

pub const STATE_SCHEMA: u32 = 1;
pub const RESULT_SCHEMA: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no usable reductions after initialization:\n{}", .diagnostics.join("\n"))]
    NoActiveReductions { diagnostics: Vec<String> },
    #[error("dataset is for {dataset:?} but the run is for {expected:?}")]
    KindMismatch { expected: CopKind, dataset: CopKind },
    #[error("checkpoint does not match this run: {0}")]
    CheckpointMismatch(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Dataset(#[from] CopError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A heuristic together with the reduction it was evaluated under, enough
/// to run it on new instances of the original problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicBundle {
    pub cop_kind: CopKind,
    pub heuristic_id: usize,
    pub lr_id: usize,
    /// Generation in which this fitness was observed.
    pub generation: usize,
    pub fitness: f64,
    pub description: String,
    pub heuristic_code: String,
    pub problem_b: ProblemDescription,
    pub reduction_code: String,
    pub code_template: String,
}

impl HeuristicBundle {
    pub fn load(path: &Path) -> Result<Self, EvolutionError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrScoreEntry {
    pub lr_id: usize,
    pub score: LrScore,
    pub stagnation_counter: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRation {
    pub operator: Operator,
    pub plan: RationPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementEvent {
    pub lr_id: usize,
    pub outcome: RefinementOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness in the managed population.
    pub best_fitness: Option<f64>,
    pub best_so_far: Option<f64>,
    pub population_size: usize,
    pub population_fingerprint: Vec<(usize, f64)>,
    pub lr_scores: Vec<LrScoreEntry>,
    pub rations: Vec<OperatorRation>,
    pub offspring_attempted: usize,
    pub offspring_ok: usize,
    /// Offspring whose answer could not be parsed; they still use up a slot.
    pub offspring_discarded: usize,
    pub refinements: Vec<RefinementEvent>,
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineState {
    pub schema_version: u32,
    pub cop_kind: CopKind,
    pub config: EvolutionConfig,
    pub dataset_digest: String,
    /// Completed generations; initialization is generation 0.
    pub generation: usize,
    /// All candidate reductions, indexed by id.
    pub lrs: Vec<LanguageReduction>,
    /// Active reduction ids in ration order.
    pub active: Vec<usize>,
    pub population: Vec<Heuristic>,
    pub next_heuristic_id: usize,
    pub rng: ChaCha8Rng,
    pub best: Option<HeuristicBundle>,
    pub records: Vec<GenerationRecord>,
    pub warnings: Vec<String>,
    /// Model requests made so far; replay resumes after this many.
    pub llm_calls: usize,
}

impl EngineState {
    pub fn load(path: &Path) -> Result<Self, EvolutionError> {
        let state: EngineState = serde_json::from_str(&fs::read_to_string(path)?)?;
        if state.schema_version != STATE_SCHEMA {
            return Err(EvolutionError::CheckpointMismatch(format!(
                "schema version {} (expected {STATE_SCHEMA})",
                state.schema_version
            )));
        }
        Ok(state)
    }

    /// Writes through a temporary file so a crash never leaves a torn
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<(), EvolutionError> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub id: usize,
    pub status: LrStatus,
    pub problem_b: ProblemDescription,
    pub score: LrScore,
    pub stagnation_counter: u32,
    pub refinements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_cause: Option<String>,
}

/// Outcome of a run. Contains no wall-clock data, so replaying the same
/// transcript reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub cop_kind: CopKind,
    pub config: EvolutionConfig,
    pub dataset_digest: String,
    pub transcript_id: Option<String>,
    pub best: HeuristicBundle,
    pub generations: Vec<GenerationRecord>,
    pub reductions: Vec<ReductionSummary>,
    pub warnings: Vec<String>,
    pub llm_calls: usize,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    /// SHA-256 of the JSON serialization, hex encoded.
    pub fn digest(&self) -> Result<String, serde_json::Error> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

/// Offspring or initial heuristic waiting for its model answer.
#[derive(Debug, Clone)]
struct Job {
    id: usize,
    lr_id: usize,
    operator: Operator,
    parents: Vec<usize>,
}

fn parse_heuristic(response: &str) -> Result<(String, String), String> {
    let code = extract_code(response, &[SOLVE_ENTRY]).map_err(|e| e.to_string())?;
    let description = extract_braced_description(response).map_err(|e| e.to_string())?;
    Ok((description, code))
}

pub struct Engine<'a> {
    config: EvolutionConfig,
    kind: CopKind,
    llm: &'a LlmClient,
    sandbox: &'a dyn Sandbox,
    dataset: &'a Dataset,
    root: ProblemDescription,
    template: ReductionTemplate,
    checkpoint_dir: Option<PathBuf>,
}

impl<'a> Engine<'a> {
    pub fn new(
        config: EvolutionConfig,
        llm: &'a LlmClient,
        sandbox: &'a dyn Sandbox,
        dataset: &'a Dataset,
    ) -> Result<Self, EvolutionError> {
        config.check().map_err(EvolutionError::Config)?;
        if dataset.is_empty() {
            return Err(EvolutionError::Config("dataset has no instances".into()));
        }
        let kind = dataset.kind;
        Ok(Self {
            config,
            kind,
            llm,
            sandbox,
            dataset,
            root: ProblemDescription::root(kind),
            template: ReductionTemplate::for_kind(kind),
            checkpoint_dir: None,
        })
    }

    /// Writes a checkpoint into `dir` after initialization and after every
    /// generation.
    pub fn with_checkpoints(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    /// Runs model requests in job order, concurrently only for live clients.
    fn ask_all<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
        let workers = if self.llm.is_live() { self.config.workers } else { 1 };
        parallel_map(items, workers, f)
    }

    fn evaluate_all(&self, jobs: &[(usize, &str, &str)]) -> Result<Vec<Evaluation>, SandboxError> {
        parallel_map(jobs, self.config.workers, |&(id, lr_code, code)| {
            evaluate_code(
                &format!("h{id}"),
                code,
                lr_code,
                self.dataset,
                self.sandbox,
                self.config.timeout_seconds,
            )
        })
        .into_iter()
        .collect()
    }

    fn ask_heuristic(&self, prompt: &str) -> Result<Option<(String, String)>, EvolutionError> {
        match self.llm.ask(prompt, self.config.max_retries, parse_heuristic) {
            Ok(v) => Ok(Some(v)),
            Err(AskError::Exhausted { last, .. }) => {
                warn!("discarding offspring: {last}");
                Ok(None)
            }
            Err(AskError::Llm(e)) => Err(e.into()),
        }
    }

    /// Proposes candidate reductions, vets each one with its initial
    /// heuristics, activates the best M and builds the first population.
    pub fn initialize(&self) -> Result<EngineState, EvolutionError> {
        let cfg = &self.config;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let descriptions = propose_candidate_problems(&self.root, cfg.candidate_reductions, self.llm, cfg.max_retries)
            .map_err(|e| match e {
                ReductionError::Ask { source: AskError::Exhausted { .. }, .. } => {
                    EvolutionError::NoActiveReductions { diagnostics: vec![e.to_string()] }
                }
                other => other.into(),
            })?;
        info!("{} candidate reduced problems", descriptions.len());
        let mut lrs: Vec<LanguageReduction> = descriptions
            .into_iter()
            .enumerate()
            .map(|(id, b)| LanguageReduction::new(id, b, String::new(), String::new()))
            .collect();
        let per_lr = cfg.initial_per_reduction();
        let mut next_id = 0;
        let mut all: Vec<Heuristic> = Vec::new();
        // failure from the previous round, fed back into the reduction prompt
        let mut feedback: Vec<Option<String>> = vec![None; lrs.len()];
        let mut pending: Vec<usize> = (0..lrs.len()).collect();
        for round in 0..=cfg.max_retries {
            if pending.is_empty() {
                break;
            }
            // ids are fixed before any model call so concurrency cannot
            // change them
            let slots: Vec<(usize, Vec<usize>)> = pending
                .iter()
                .map(|&j| {
                    let ids = (next_id..next_id + per_lr).collect();
                    next_id += per_lr;
                    (j, ids)
                })
                .collect();
            let synthesized = self.ask_all(&slots, |(j, ids)| {
                self.synthesize_candidate(&lrs[*j].problem_b, feedback[*j].as_deref(), *j, ids)
            });
            let mut built: Vec<(usize, String, String, Vec<Heuristic>)> = Vec::new();
            for ((j, _), outcome) in slots.iter().zip(synthesized) {
                match outcome? {
                    Ok((code, template, hs)) => built.push((*j, code, template, hs)),
                    Err(cause) => {
                        lrs[*j].status = LrStatus::Invalid;
                        lrs[*j].invalid_cause = Some(cause);
                    }
                }
            }
            let jobs: Vec<(usize, &str, &str)> = built
                .iter()
                .flat_map(|(_, code, _, hs)| hs.iter().map(move |h| (h.id, code.as_str(), h.code.as_str())))
                .collect();
            let evals = self.evaluate_all(&jobs)?;
            let mut evals = evals.into_iter();
            let mut retry = Vec::new();
            for (j, code, template, mut hs) in built {
                for h in &mut hs {
                    h.apply(evals.next().expect("one evaluation per heuristic"));
                }
                let lr = &mut lrs[j];
                lr.reduction_code = code;
                lr.code_template = template;
                if hs.iter().any(Heuristic::is_ok) {
                    lr.status = LrStatus::Candidate;
                    lr.invalid_cause = None;
                    lr.score = compute_lr_score(j, &hs, cfg.top_l);
                } else {
                    let cause = hs
                        .iter()
                        .find_map(|h| h.detail.clone())
                        .unwrap_or_else(|| "no heuristic could be generated".into());
                    info!("reduction {j} failed vetting in round {round}: {cause}");
                    lr.status = LrStatus::Invalid;
                    lr.score = LrScore::Failed;
                    lr.invalid_cause = Some(cause.clone());
                    feedback[j] = Some(cause);
                    retry.push(j);
                }
                all.extend(hs);
            }
            pending = retry;
        }

        let selection = select_initial_lrs(&mut lrs, cfg.active_reductions);
        let mut warnings = Vec::new();
        if let Some(w) = selection.warning {
            warn!("{w}");
            warnings.push(w);
        }
        if selection.active.is_empty() {
            let diagnostics = lrs
                .iter()
                .map(|lr| {
                    format!(
                        "reduction {}: {}",
                        lr.id,
                        lr.invalid_cause.as_deref().unwrap_or("no score")
                    )
                })
                .collect();
            return Err(EvolutionError::NoActiveReductions { diagnostics });
        }
        info!("active reductions {:?}", selection.active);

        let mut state = EngineState {
            schema_version: STATE_SCHEMA,
            cop_kind: self.kind,
            config: cfg.clone(),
            dataset_digest: self.dataset.digest()?,
            generation: 0,
            lrs,
            active: selection.active,
            population: Vec::new(),
            next_heuristic_id: next_id,
            rng,
            best: None,
            records: Vec::new(),
            warnings,
            llm_calls: 0,
        };
        // every evaluated candidate heuristic counts towards the best ever,
        // including those of reductions that were not selected
        for h in &all {
            self.observe(&mut state.best, h, &state.lrs[h.lr_id], 0);
        }
        let members: Vec<Heuristic> = all
            .into_iter()
            .filter(|h| state.active.contains(&h.lr_id))
            .collect();
        state.population = manage_population(members, self.manage_settings(0, &state.active));
        let record = GenerationRecord {
            generation: 0,
            best_fitness: state.population.iter().filter_map(|h| h.fitness).reduce(f64::max),
            best_so_far: state.best.as_ref().map(|b| b.fitness),
            population_size: state.population.len(),
            population_fingerprint: population_fingerprint(&state.population),
            lr_scores: self.score_entries(&state),
            rations: Vec::new(),
            offspring_attempted: 0,
            offspring_ok: 0,
            offspring_discarded: 0,
            refinements: Vec::new(),
        };
        state.records.push(record);
        state.llm_calls = self.llm.calls();
        self.checkpoint(&state)?;
        Ok(state)
    }

    /// Reduction code, template and initial heuristics for one candidate.
    /// The inner error is a non-fatal cause that marks the candidate invalid.
    #[allow(clippy::type_complexity)]
    fn synthesize_candidate(
        &self,
        problem_b: &ProblemDescription,
        feedback: Option<&str>,
        lr_id: usize,
        ids: &[usize],
    ) -> Result<Result<(String, String, Vec<Heuristic>), String>, EvolutionError> {
        let cfg = &self.config;
        let base = reduction_prompt(&self.root, problem_b, &self.template);
        let prompt = match feedback {
            Some(f) => with_feedback(&base, f),
            None => base,
        };
        let code = match self.llm.ask(&prompt, cfg.max_retries, |r| {
            extract_code(r, &[crate::prompts::INSTANCE_MAP, crate::prompts::SOLUTION_MAP]).map_err(|e| e.to_string())
        }) {
            Ok(c) => c,
            Err(AskError::Llm(e)) => return Err(e.into()),
            Err(e) => return Ok(Err(format!("reduction code: {e}"))),
        };
        let template = match synthesize_code_template(&code, self.llm, cfg.max_retries) {
            Ok(t) => t,
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => return Ok(Err(e.to_string())),
        };
        let prompt = init_prompt(problem_b, &template);
        let mut hs = Vec::new();
        for &id in ids {
            if let Some((description, code)) = self.ask_heuristic(&prompt)? {
                hs.push(Heuristic::new(id, lr_id, description, code, Origin { generation: 0, operator: Operator::Init }));
            }
        }
        Ok(Ok((code, template, hs)))
    }

    fn manage_settings<'s>(&self, generation: usize, active: &'s [usize]) -> ManageSettings<'s> {
        ManageSettings {
            capacity: self.config.population_size,
            generation,
            threshold: self.config.stagnation_threshold as usize,
            l: self.config.top_l,
            active_lrs: active,
        }
    }

    fn score_entries(&self, state: &EngineState) -> Vec<LrScoreEntry> {
        state
            .active
            .iter()
            .map(|&j| LrScoreEntry {
                lr_id: j,
                score: state.lrs[j].score,
                stagnation_counter: state.lrs[j].stagnation_counter,
            })
            .collect()
    }

    /// Keeps the first heuristic reaching a new best fitness.
    fn observe(&self, best: &mut Option<HeuristicBundle>, h: &Heuristic, lr: &LanguageReduction, generation: usize) {
        let Some(q) = h.fitness.filter(|_| h.is_ok()) else { return };
        if best.as_ref().is_some_and(|b| q <= b.fitness) {
            return;
        }
        *best = Some(HeuristicBundle {
            cop_kind: self.kind,
            heuristic_id: h.id,
            lr_id: lr.id,
            generation,
            fitness: q,
            description: h.description.clone(),
            heuristic_code: h.code.clone(),
            problem_b: lr.problem_b.clone(),
            reduction_code: lr.reduction_code.clone(),
            code_template: lr.code_template.clone(),
        });
    }

    /// One generation: both operators, management, scoring and refinement.
    pub fn step(&self, state: &mut EngineState) -> Result<(), EvolutionError> {
        let cfg = &self.config;
        let generation = state.generation + 1;
        let sense = self.kind.sense();
        let scores: Vec<LrScore> = state.active.iter().map(|&j| state.lrs[j].score).collect();

        // all random draws happen here, in a fixed order
        let mut rations = Vec::new();
        let mut jobs = Vec::new();
        for operator in [Operator::CrossoverE2, Operator::MutationM1] {
            let plan = allocate_ration(&state.active, &scores, cfg.population_size, sense, &mut state.rng);
            for (&lr_id, &count) in plan.lr_ids.iter().zip(&plan.counts) {
                for _ in 0..count {
                    let parents = if state.population.is_empty() {
                        Vec::new()
                    } else {
                        select_parents(&state.population, operator.arity(), &mut state.rng)
                    };
                    jobs.push(Job { id: state.next_heuristic_id, lr_id, operator, parents });
                    state.next_heuristic_id += 1;
                }
            }
            rations.push(OperatorRation { operator, plan });
        }

        let answers = self.ask_all(&jobs, |job| {
            let lr = &state.lrs[job.lr_id];
            let view = |p: usize| ParentView {
                description: &state.population[p].description,
                code: &state.population[p].code,
            };
            let prompt = match (job.operator, job.parents.as_slice()) {
                (Operator::CrossoverE2, &[a, b]) => crossover_prompt(&lr.problem_b, &lr.code_template, view(a), view(b)),
                (Operator::MutationM1, &[a]) => mutation_prompt(&lr.problem_b, &lr.code_template, view(a)),
                // no parents available: start from scratch
                _ => init_prompt(&lr.problem_b, &lr.code_template),
            };
            self.ask_heuristic(&prompt)
        });
        let mut offspring = Vec::new();
        let mut discarded = 0;
        for (job, answer) in jobs.iter().zip(answers) {
            match answer? {
                Some((description, code)) => {
                    let mut h = Heuristic::new(job.id, job.lr_id, description, code, Origin { generation, operator: job.operator });
                    h.parents = job.parents.iter().map(|&p| state.population[p].id).collect();
                    offspring.push(h);
                }
                None => discarded += 1,
            }
        }
        let eval_jobs: Vec<(usize, &str, &str)> = offspring
            .iter()
            .map(|h| (h.id, state.lrs[h.lr_id].reduction_code.as_str(), h.code.as_str()))
            .collect();
        let evals = self.evaluate_all(&eval_jobs)?;
        for (h, e) in offspring.iter_mut().zip(evals) {
            h.apply(e);
        }
        for h in &offspring {
            self.observe(&mut state.best, h, &state.lrs[h.lr_id], generation);
        }
        let offspring_ok = offspring.iter().filter(|h| h.is_ok()).count();

        let mut candidates = std::mem::take(&mut state.population);
        candidates.extend(offspring);
        state.population = manage_population(candidates, self.manage_settings(generation, &state.active));

        for &j in &state.active {
            let score = compute_lr_score(j, &state.population, cfg.top_l);
            let lr = &mut state.lrs[j];
            match score {
                // no members left: the reduction keeps competing on its last score
                LrScore::Unset => lr.update_score(lr.score),
                s => lr.update_score(s),
            }
        }

        let mut refinements = Vec::new();
        for &j in &state.active.clone() {
            if !state.lrs[j].needs_refinement(cfg.stagnation_threshold) {
                continue;
            }
            let settings = RefineSettings {
                l: cfg.top_l,
                threshold: cfg.stagnation_threshold,
                retries: cfg.max_retries,
                timeout_seconds: cfg.timeout_seconds,
                workers: cfg.workers,
                generation,
            };
            let outcome = refine_reduction(
                &mut state.lrs[j],
                &self.root,
                self.llm,
                &mut state.population,
                self.dataset,
                self.sandbox,
                settings,
            )?;
            info!("generation {generation}: refinement of reduction {j}: {outcome:?}");
            if outcome.committed() {
                for h in state.population.iter().filter(|h| h.lr_id == j) {
                    self.observe(&mut state.best, h, &state.lrs[j], generation);
                }
            }
            refinements.push(RefinementEvent { lr_id: j, outcome });
        }

        state.generation = generation;
        state.records.push(GenerationRecord {
            generation,
            best_fitness: state.population.iter().filter_map(|h| h.fitness).reduce(f64::max),
            best_so_far: state.best.as_ref().map(|b| b.fitness),
            population_size: state.population.len(),
            population_fingerprint: population_fingerprint(&state.population),
            lr_scores: self.score_entries(state),
            rations,
            offspring_attempted: jobs.len(),
            offspring_ok,
            offspring_discarded: discarded,
            refinements,
        });
        state.llm_calls = self.llm.calls();
        info!(
            "generation {generation}: best so far {:?}, population {}",
            state.best.as_ref().map(|b| b.fitness),
            state.population.len()
        );
        self.checkpoint(state)
    }

    fn checkpoint(&self, state: &EngineState) -> Result<(), EvolutionError> {
        if let Some(dir) = &self.checkpoint_dir {
            fs::create_dir_all(dir)?;
            state.save(&dir.join(CHECKPOINT_FILE))?;
        }
        Ok(())
    }

    pub fn run(&self) -> Result<RunResult, EvolutionError> {
        let state = self.initialize()?;
        self.resume(state)
    }

    /// Continues from a checkpointed state until all generations are done.
    pub fn resume(&self, state: EngineState) -> Result<RunResult, EvolutionError> {
        let state = self.complete(state)?;
        Ok(self.result(&state))
    }

    /// Runs the remaining generations of `state` and returns the final state.
    pub fn complete(&self, mut state: EngineState) -> Result<EngineState, EvolutionError> {
        if state.cop_kind != self.kind {
            return Err(EvolutionError::KindMismatch { expected: state.cop_kind, dataset: self.kind });
        }
        if state.config != self.config {
            return Err(EvolutionError::CheckpointMismatch("configuration differs".into()));
        }
        if state.dataset_digest != self.dataset.digest()? {
            return Err(EvolutionError::CheckpointMismatch("dataset differs".into()));
        }
        while state.generation < self.config.generations {
            self.step(&mut state)?;
        }
        Ok(state)
    }

    pub fn result(&self, state: &EngineState) -> RunResult {
        RunResult {
            schema_version: RESULT_SCHEMA,
            cop_kind: state.cop_kind,
            config: state.config.clone(),
            dataset_digest: state.dataset_digest.clone(),
            transcript_id: self.llm.transcript_id().map(str::to_string),
            best: state.best.clone().expect("an active reduction has an ok heuristic"),
            generations: state.records.clone(),
            reductions: state
                .lrs
                .iter()
                .map(|lr| ReductionSummary {
                    id: lr.id,
                    status: lr.status,
                    problem_b: lr.problem_b.clone(),
                    score: lr.score,
                    stagnation_counter: lr.stagnation_counter,
                    refinements: lr.history.len(),
                    invalid_cause: lr.invalid_cause.clone(),
                })
                .collect(),
            warnings: state.warnings.clone(),
            llm_calls: state.llm_calls,
        }
    }
}

/// Full pipeline: reduction initialization followed by the configured
/// number of generations.
pub fn run_evolution(
    config: EvolutionConfig,
    llm: &LlmClient,
    sandbox: &dyn Sandbox,
    dataset: &Dataset,
) -> Result<RunResult, EvolutionError> {
    Engine::new(config, llm, sandbox, dataset)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cop::{generate_instances, GeneratorParams};
    use crate::llm::ChatParams;
    use crate::sandbox::FixtureSandbox;
    use crate::scripted::scripted_client;

    fn small(kind: CopKind) -> (EvolutionConfig, Dataset) {
        let params = match kind {
            CopKind::Kp => GeneratorParams::Kp { n: 20, capacity: 5.0 },
            CopKind::Tsp => GeneratorParams::Tsp { n: 12 },
            _ => unreachable!(),
        };
        let mut cfg = EvolutionConfig::for_kind(kind);
        cfg.population_size = 6;
        cfg.active_reductions = 2;
        cfg.candidate_reductions = 4;
        cfg.generations = 3;
        cfg.timeout_seconds = 10.0;
        cfg.workers = 4;
        (cfg, generate_instances(&params, 5, 8).unwrap())
    }

    fn params() -> ChatParams {
        ChatParams { model: "scripted".into(), temperature: 1.0 }
    }

    #[test]
    fn scripted_run_is_reproducible() {
        let (cfg, data) = small(CopKind::Kp);
        let sandbox = FixtureSandbox::new();
        let a = run_evolution(cfg.clone(), &scripted_client(CopKind::Kp, params()), &sandbox, &data).unwrap();
        let b = run_evolution(cfg, &scripted_client(CopKind::Kp, params()), &sandbox, &data).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.generations.len(), 4);
        for g in &a.generations[1..] {
            assert_eq!(g.offspring_attempted, 12);
            for r in &g.rations {
                assert_eq!(r.plan.total(), 6);
            }
        }
        let trace: Vec<f64> = a.generations.iter().map(|g| g.best_so_far.unwrap()).collect();
        assert!(trace.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.best.fitness, *trace.last().unwrap());
    }

    #[test]
    fn zero_generations_return_the_best_initial_heuristic() {
        let (mut cfg, data) = small(CopKind::Tsp);
        cfg.generations = 0;
        let sandbox = FixtureSandbox::new();
        let r = run_evolution(cfg, &scripted_client(CopKind::Tsp, params()), &sandbox, &data).unwrap();
        assert_eq!(r.generations.len(), 1);
        assert_eq!(r.best.generation, 0);
        assert_eq!(Some(r.best.fitness), r.generations[0].best_so_far);
    }
}
