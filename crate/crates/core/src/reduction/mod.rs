//! Language reductions: a reduced problem described in words, code mapping
//! instances to it and solutions back, and the solver skeleton heuristics
//! for it must follow.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cop::Dataset;
use crate::evolution::{evaluate_code, parallel_map, EvalStatus, Evaluation, Heuristic};
use crate::llm::{extract_code, parse_double_braced, AskError, LlmClient};
use crate::prompts::{
    candidates_prompt, code_template_prompt, reduction_prompt, refine_prompt,
    ProblemDescription, ReductionTemplate, INSTANCE_MAP, SOLUTION_MAP, SOLVE_ENTRY,
};
use crate::sandbox::{Sandbox, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrStatus {
    Candidate,
    Active,
    Retired,
    /// Failed synthesis or vetting; never selected.
    Invalid,
}

/// Score of a reduction: mean fitness of its best heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum LrScore {
    /// No heuristic evaluated yet.
    #[default]
    Unset,
    /// Every heuristic failed; ranks below any value.
    Failed,
    Value(f64),
}

impl LrScore {
    /// Numeric view with failures as negative infinity.
    pub fn as_f64(self) -> Option<f64> {
        match self {
            LrScore::Unset => None,
            LrScore::Failed => Some(f64::NEG_INFINITY),
            LrScore::Value(v) => Some(v),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            LrScore::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Strict improvement; unset and failed scores are beaten by any value.
    pub fn improves_on(self, old: LrScore) -> bool {
        match (self.value(), old.value()) {
            (Some(new), Some(old)) => new > old,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum RefinementOutcome {
    Committed { old: LrScore, new: LrScore },
    RejectedNotBetter { old: LrScore, new: LrScore },
    RejectedInvalid { cause: String },
    RejectedLlm { cause: String },
}

impl RefinementOutcome {
    pub fn committed(&self) -> bool {
        matches!(self, RefinementOutcome::Committed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub generation: usize,
    pub outcome: RefinementOutcome,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageReduction {
    pub id: usize,
    pub problem_b: ProblemDescription,
    /// Instance map and solution map.
    pub reduction_code: String,
    /// Solver skeleton heuristics complete.
    pub code_template: String,
    pub score: LrScore,
    pub stagnation_counter: u32,
    /// Set once refinement was tried in the current stagnation episode.
    pub refinement_attempted: bool,
    pub status: LrStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_cause: Option<String>,
    #[serde(default)]
    pub history: Vec<RefinementRecord>,
}

impl LanguageReduction {
    pub fn new(id: usize, problem_b: ProblemDescription, reduction_code: String, code_template: String) -> Self {
        Self {
            id,
            problem_b,
            reduction_code,
            code_template,
            score: LrScore::Unset,
            stagnation_counter: 0,
            refinement_attempted: false,
            status: LrStatus::Candidate,
            invalid_cause: None,
            history: Vec::new(),
        }
    }

    /// Records a freshly computed score: a strict improvement ends the
    /// stagnation episode, anything else extends it.
    pub fn update_score(&mut self, score: LrScore) {
        if score.improves_on(self.score) {
            self.stagnation_counter = 0;
            self.refinement_attempted = false;
        } else {
            self.stagnation_counter += 1;
        }
        self.score = score;
    }

    pub fn needs_refinement(&self, threshold: u32) -> bool {
        self.status == LrStatus::Active
            && self.stagnation_counter >= threshold
            && !self.refinement_attempted
    }
}

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("{stage}: {source}")]
    Ask {
        stage: &'static str,
        #[source]
        source: AskError,
    },
    #[error("refinement needs a stagnation counter of at least {threshold}, found {counter}")]
    NotStagnant { counter: u32, threshold: u32 },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ReductionError {
    /// Client failures that should end the run.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ReductionError::Ask { source: AskError::Llm(_), .. } | ReductionError::Sandbox(_))
    }
}

fn ask_stage<T>(
    stage: &'static str,
    llm: &LlmClient,
    prompt: &str,
    retries: u32,
    parse: impl FnMut(&str) -> Result<T, String>,
) -> Result<T, ReductionError> {
    llm.ask(prompt, retries, parse)
        .map_err(|source| ReductionError::Ask { stage, source })
}

/// Asks for `m_init` reduced problems and keeps up to that many
/// double-braced descriptions.
pub fn propose_candidate_problems(
    desc_a: &ProblemDescription,
    m_init: usize,
    llm: &LlmClient,
    retries: u32,
) -> Result<Vec<ProblemDescription>, ReductionError> {
    let prompt = candidates_prompt(desc_a, m_init.max(1));
    ask_stage("candidate problems", llm, &prompt, retries, |r| {
        let found: Vec<ProblemDescription> = parse_double_braced(r)
            .into_iter()
            .filter_map(ProblemDescription::new)
            .take(m_init)
            .collect();
        if found.is_empty() {
            Err("no descriptions enclosed in double braces".into())
        } else {
            Ok(found)
        }
    })
}

fn reduction_parser(r: &str) -> Result<String, String> {
    extract_code(r, &[INSTANCE_MAP, SOLUTION_MAP]).map_err(|e| e.to_string())
}

/// Code for the instance and solution maps. The code is not executed here.
pub fn synthesize_reduction(
    desc_a: &ProblemDescription,
    desc_b: &ProblemDescription,
    template: &ReductionTemplate,
    llm: &LlmClient,
    retries: u32,
) -> Result<String, ReductionError> {
    let prompt = reduction_prompt(desc_a, desc_b, template);
    ask_stage("reduction code", llm, &prompt, retries, reduction_parser)
}

/// The solver skeleton matching a reduction, from a separate model call.
pub fn synthesize_code_template(
    reduction_code: &str,
    llm: &LlmClient,
    retries: u32,
) -> Result<String, ReductionError> {
    let prompt = code_template_prompt(reduction_code);
    ask_stage("code template", llm, &prompt, retries, |r| {
        extract_code(r, &[SOLVE_ENTRY]).map_err(|e| e.to_string())
    })
}

/// Mean of the `l` best fitness values among the reduction's successfully
/// evaluated heuristics, or of all of them when there are fewer.
pub fn compute_lr_score(lr_id: usize, heuristics: &[Heuristic], l: usize) -> LrScore {
    let mut tagged = heuristics.iter().filter(|h| h.lr_id == lr_id).peekable();
    if tagged.peek().is_none() {
        return LrScore::Unset;
    }
    let mut fitness: Vec<f64> = tagged.filter(|h| h.is_ok()).filter_map(|h| h.fitness).collect();
    if fitness.is_empty() {
        return LrScore::Failed;
    }
    fitness.sort_by(|a, b| b.total_cmp(a));
    let top = &fitness[..l.max(1).min(fitness.len())];
    LrScore::Value(top.iter().sum::<f64>() / top.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen reduction ids, best first.
    pub active: Vec<usize>,
    pub warning: Option<String>,
}

/// Activates the `m` best-scoring valid candidates (earlier candidates win
/// ties) and retires the other valid ones.
pub fn select_initial_lrs(candidates: &mut [LanguageReduction], m: usize) -> Selection {
    let mut ranked: Vec<usize> = (0..candidates.len())
        .filter(|&i| {
            candidates[i].status != LrStatus::Invalid && candidates[i].score.value().is_some()
        })
        .collect();
    ranked.sort_by(|&a, &b| {
        let (x, y) = (candidates[a].score.value().unwrap(), candidates[b].score.value().unwrap());
        y.total_cmp(&x)
    });
    let valid = ranked.len();
    let warning = (valid < m).then(|| {
        format!("only {valid} valid reductions for {m} slots; continuing with all of them")
    });
    let mut active = Vec::new();
    for (rank, &i) in ranked.iter().enumerate() {
        if rank < m {
            candidates[i].status = LrStatus::Active;
            active.push(candidates[i].id);
        } else {
            candidates[i].status = LrStatus::Retired;
        }
    }
    Selection { active, warning }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub valid: bool,
    /// One evaluation per probe, in probe order.
    pub evaluations: Vec<Evaluation>,
    pub cause: Option<String>,
}

/// A reduction is valid when at least one probe produces feasible
/// solutions on every instance within the budget.
pub fn vet_reduction(
    lr: &LanguageReduction,
    probes: &[Heuristic],
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    timeout_seconds: f64,
    workers: usize,
) -> Result<ValidationOutcome, SandboxError> {
    let evaluations = parallel_map(probes, workers, |h| {
        evaluate_code(
            &format!("h{}-lr{}", h.id, lr.id),
            &h.code,
            &lr.reduction_code,
            dataset,
            sandbox,
            timeout_seconds,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let valid = evaluations.iter().any(|e| e.status == EvalStatus::Ok);
    let cause = if valid {
        None
    } else {
        Some(
            evaluations
                .iter()
                .find_map(|e| e.detail.clone())
                .unwrap_or_else(|| "no probe heuristics".into()),
        )
    };
    Ok(ValidationOutcome {
        valid,
        evaluations,
        cause,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RefineSettings {
    pub l: usize,
    pub threshold: u32,
    pub retries: u32,
    pub timeout_seconds: f64,
    pub workers: usize,
    pub generation: usize,
}

/// Asks for improved reduction code for a stagnant reduction and keeps it
/// only if the reduction's score strictly improves. On rejection the
/// reduction and `population` are left exactly as they were.
pub fn refine_reduction(
    lr: &mut LanguageReduction,
    desc_a: &ProblemDescription,
    llm: &LlmClient,
    population: &mut Vec<Heuristic>,
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    settings: RefineSettings,
) -> Result<RefinementOutcome, ReductionError> {
    if lr.stagnation_counter < settings.threshold {
        return Err(ReductionError::NotStagnant {
            counter: lr.stagnation_counter,
            threshold: settings.threshold,
        });
    }
    lr.refinement_attempted = true;
    let outcome = attempt_refinement(lr, desc_a, llm, population, dataset, sandbox, settings);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) if e.is_fatal() => return Err(e),
        Err(e) => RefinementOutcome::RejectedLlm {
            cause: e.to_string(),
        },
    };
    lr.history.push(RefinementRecord {
        generation: settings.generation,
        outcome: outcome.clone(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    });
    Ok(outcome)
}

fn attempt_refinement(
    lr: &mut LanguageReduction,
    desc_a: &ProblemDescription,
    llm: &LlmClient,
    population: &mut Vec<Heuristic>,
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    settings: RefineSettings,
) -> Result<RefinementOutcome, ReductionError> {
    let prompt = refine_prompt(desc_a, &lr.problem_b, &lr.reduction_code);
    let new_code = ask_stage("refined reduction", llm, &prompt, settings.retries, reduction_parser)?;
    let new_template = synthesize_code_template(&new_code, llm, settings.retries)?;

    let mut trial = lr.clone();
    trial.reduction_code = new_code;
    trial.code_template = new_template;
    let mut members: Vec<Heuristic> = population
        .iter()
        .filter(|h| h.lr_id == lr.id)
        .cloned()
        .collect();
    let check = vet_reduction(
        &trial,
        &members,
        dataset,
        sandbox,
        settings.timeout_seconds,
        settings.workers,
    )?;
    if !check.valid {
        return Ok(RefinementOutcome::RejectedInvalid {
            cause: check.cause.unwrap_or_default(),
        });
    }
    for (h, eval) in members.iter_mut().zip(check.evaluations) {
        h.apply(eval);
    }
    let old = lr.score;
    let new = compute_lr_score(lr.id, &members, settings.l);
    if !new.improves_on(old) {
        return Ok(RefinementOutcome::RejectedNotBetter { old, new });
    }

    lr.reduction_code = trial.reduction_code;
    lr.code_template = trial.code_template;
    lr.score = new;
    lr.stagnation_counter = 0;
    lr.refinement_attempted = false;
    // re-evaluated members replace the old ones; those that no longer work
    // under the new maps leave the population
    let mut updated = members.into_iter();
    let mut next = Vec::with_capacity(population.len());
    for h in population.drain(..) {
        if h.lr_id == lr.id {
            let r = updated.next().expect("one re-evaluation per member");
            if r.is_ok() {
                next.push(r);
            }
        } else {
            next.push(h);
        }
    }
    *population = next;
    Ok(RefinementOutcome::Committed { old, new })
}

/// Writes one JSON document per reduction into `dir`.
pub fn write_archive(dir: &Path, lrs: &[LanguageReduction]) -> Result<(), ReductionError> {
    fs::create_dir_all(dir)?;
    for lr in lrs {
        fs::write(
            dir.join(format!("lr-{}.json", lr.id)),
            serde_json::to_string_pretty(lr)?,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{Operator, Origin};

    fn h(id: usize, lr: usize, q: Option<f64>) -> Heuristic {
        let mut h = Heuristic::new(
            id,
            lr,
            String::new(),
            "def solve_B(x): pass".into(),
            Origin { generation: 0, operator: Operator::Init },
        );
        h.fitness = q;
        h.status = if q.is_some() { EvalStatus::Ok } else { EvalStatus::RuntimeError };
        h
    }

    #[test]
    fn score_examples() {
        let pop: Vec<Heuristic> = [-5.0, -4.0, -6.0, -10.0]
            .iter()
            .enumerate()
            .map(|(i, &q)| h(i, 0, Some(q)))
            .collect();
        assert_eq!(compute_lr_score(0, &pop, 3), LrScore::Value(-5.0));
        assert_eq!(compute_lr_score(0, &[h(0, 0, Some(7.0))], 3), LrScore::Value(7.0));
        assert_eq!(compute_lr_score(1, &pop, 3), LrScore::Unset);
        assert_eq!(compute_lr_score(0, &[h(0, 0, None)], 3), LrScore::Failed);
    }

    fn lr_with(id: usize, score: LrScore) -> LanguageReduction {
        let mut lr = LanguageReduction::new(
            id,
            ProblemDescription::new(format!("Problem B{id}")).unwrap(),
            String::new(),
            String::new(),
        );
        lr.score = score;
        lr
    }

    #[test]
    fn selection_examples() {
        let mut c: Vec<_> = [-5.0, -7.0, -4.0, -9.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| lr_with(i, LrScore::Value(s)))
            .collect();
        let sel = select_initial_lrs(&mut c, 3);
        assert_eq!(sel.active, vec![2, 0, 1]);
        assert_eq!(c[3].status, LrStatus::Retired);
        assert!(sel.warning.is_none());

        let mut c = vec![lr_with(0, LrScore::Value(-1.0)), lr_with(1, LrScore::Failed), lr_with(2, LrScore::Value(-2.0))];
        let sel = select_initial_lrs(&mut c, 3);
        assert_eq!(sel.active, vec![0, 2]);
        assert!(sel.warning.is_some());

        let mut c = vec![lr_with(0, LrScore::Value(-3.0)), lr_with(1, LrScore::Value(-3.0))];
        assert_eq!(select_initial_lrs(&mut c, 1).active, vec![0]);
    }

    #[test]
    fn stagnation_bookkeeping() {
        let mut lr = lr_with(0, LrScore::Value(-5.0));
        lr.status = LrStatus::Active;
        for _ in 0..3 {
            lr.update_score(LrScore::Value(-5.0));
        }
        assert!(lr.needs_refinement(3));
        lr.refinement_attempted = true;
        lr.update_score(LrScore::Value(-5.0));
        assert!(!lr.needs_refinement(3));
        lr.update_score(LrScore::Value(-4.0));
        assert_eq!(lr.stagnation_counter, 0);
        assert!(!lr.refinement_attempted);
    }

    #[test]
    fn score_serialization() {
        let s = serde_json::to_string(&LrScore::Failed).unwrap();
        assert_eq!(s, r#"{"state":"failed"}"#);
        let v: LrScore = serde_json::from_str(r#"{"state":"value","value":-2.5}"#).unwrap();
        assert_eq!(v, LrScore::Value(-2.5));
        assert!(LrScore::Value(-3.0).improves_on(LrScore::Failed));
        assert!(!LrScore::Failed.improves_on(LrScore::Unset));
        assert!(!LrScore::Value(1.0).improves_on(LrScore::Value(1.0)));
    }
}
