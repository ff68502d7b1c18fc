use serde::{Deserialize, Serialize};

use crate::cop::{objective, validate, Dataset};
use crate::reduction::LanguageReduction;
use crate::sandbox::codec::decode_for_instance;
use crate::sandbox::{
    BatchOutcome, ErrorClass, ExecRequest, InstanceOutcome, Sandbox, SandboxError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Pending,
    Ok,
    InvalidSolution,
    RuntimeError,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Init,
    CrossoverE2,
    MutationM1,
}

impl Operator {
    /// Number of parents the operator consumes.
    pub fn arity(self) -> usize {
        match self {
            Operator::Init => 0,
            Operator::CrossoverE2 => 2,
            Operator::MutationM1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub generation: usize,
    pub operator: Operator,
}

/// A generated program for one reduced problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heuristic {
    pub id: usize,
    pub lr_id: usize,
    pub description: String,
    pub code: String,
    /// Set exactly when `status` is `Ok`.
    pub fitness: Option<f64>,
    pub status: EvalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<usize>,
}

impl Heuristic {
    pub fn new(id: usize, lr_id: usize, description: String, code: String, origin: Origin) -> Self {
        Self {
            id,
            lr_id,
            description,
            code,
            fitness: None,
            status: EvalStatus::Pending,
            detail: None,
            origin,
            parents: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }

    pub fn apply(&mut self, eval: Evaluation) {
        self.fitness = eval.fitness;
        self.status = eval.status;
        self.detail = eval.detail;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: Option<f64>,
    pub status: EvalStatus,
    /// What went wrong, for feedback and logs.
    pub detail: Option<String>,
    /// Objective per instance when every instance succeeded.
    pub objectives: Vec<f64>,
}

impl Evaluation {
    fn failed(status: EvalStatus, detail: String) -> Self {
        Self {
            fitness: None,
            status,
            detail: Some(detail),
            objectives: Vec::new(),
        }
    }
}

/// What happened on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub status: EvalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Per-instance results of one batch, or why the batch as a whole failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "batch", rename_all = "snake_case")]
pub enum BatchReport {
    Completed { instances: Vec<InstanceReport> },
    Failed { status: EvalStatus, detail: String },
}

fn instance_report(instance: &crate::cop::Instance, outcome: &InstanceOutcome) -> InstanceReport {
    let fail = |status, detail: String| InstanceReport { status, objective: None, detail: Some(detail) };
    let payload = match outcome {
        InstanceOutcome::Solution(v) => v,
        InstanceOutcome::Error(e) => {
            let status = match e.class {
                ErrorClass::Exception => EvalStatus::RuntimeError,
                ErrorClass::BadShape | ErrorClass::NonFinite => EvalStatus::InvalidSolution,
            };
            return fail(status, e.message.clone());
        }
    };
    let solution = match decode_for_instance(instance, payload) {
        Ok(s) => s,
        Err(e) => return fail(EvalStatus::InvalidSolution, e.to_string()),
    };
    match validate(instance, &solution) {
        Ok(r) if r.valid => {}
        Ok(r) => return fail(EvalStatus::InvalidSolution, r.summary()),
        Err(e) => return fail(EvalStatus::InvalidSolution, e.to_string()),
    }
    match objective(instance, &solution) {
        Ok(q) => InstanceReport { status: EvalStatus::Ok, objective: Some(q), detail: None },
        Err(e) => fail(EvalStatus::InvalidSolution, e.to_string()),
    }
}

/// Runs `heuristic_code` composed with `reduction_code` on every instance,
/// then decodes, validates and scores each solution on this side.
pub fn evaluate_instances(
    request_id: &str,
    heuristic_code: &str,
    reduction_code: &str,
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    timeout_seconds: f64,
) -> Result<BatchReport, SandboxError> {
    let request = ExecRequest::new(
        request_id,
        reduction_code,
        heuristic_code,
        &dataset.instances,
        timeout_seconds,
    )?;
    let response = sandbox.execute(&request)?;
    let failed = |status, detail: String| Ok(BatchReport::Failed { status, detail });
    match response.batch {
        BatchOutcome::Completed => {}
        BatchOutcome::Timeout => {
            return failed(
                EvalStatus::Timeout,
                format!("exceeded the {timeout_seconds} s budget for the dataset"),
            )
        }
        BatchOutcome::Crashed => {
            return failed(
                EvalStatus::RuntimeError,
                response.message.unwrap_or_else(|| "runner crashed".into()),
            )
        }
    }
    if response.outcomes.len() != dataset.len() {
        return failed(
            EvalStatus::RuntimeError,
            format!(
                "runner returned {} outcomes for {} instances",
                response.outcomes.len(),
                dataset.len()
            ),
        );
    }
    let instances = dataset
        .instances
        .iter()
        .zip(&response.outcomes)
        .map(|(inst, out)| instance_report(inst, out))
        .collect();
    Ok(BatchReport::Completed { instances })
}

/// Scores a heuristic by the mean objective over the dataset. Only
/// infrastructure failures are errors; anything the guest does wrong
/// becomes a status, the first failing instance deciding which.
pub fn evaluate_code(
    request_id: &str,
    heuristic_code: &str,
    reduction_code: &str,
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    timeout_seconds: f64,
) -> Result<Evaluation, SandboxError> {
    let report = evaluate_instances(request_id, heuristic_code, reduction_code, dataset, sandbox, timeout_seconds)?;
    let instances = match report {
        BatchReport::Completed { instances } => instances,
        BatchReport::Failed { status, detail } => return Ok(Evaluation::failed(status, detail)),
    };
    let mut objectives = Vec::with_capacity(instances.len());
    for (k, r) in instances.into_iter().enumerate() {
        match r.objective {
            Some(q) => objectives.push(q),
            None => {
                return Ok(Evaluation::failed(
                    r.status,
                    format!("instance {k}: {}", r.detail.unwrap_or_default()),
                ))
            }
        }
    }
    let fitness = objectives.iter().sum::<f64>() / objectives.len() as f64;
    Ok(Evaluation {
        fitness: Some(fitness),
        status: EvalStatus::Ok,
        detail: None,
        objectives,
    })
}

/// Fitness of a heuristic under its reduction: the mean objective of
/// g(h(f(x))) over the dataset.
pub fn evaluate_fitness(
    heuristic: &Heuristic,
    lr: &LanguageReduction,
    dataset: &Dataset,
    sandbox: &dyn Sandbox,
    timeout_seconds: f64,
) -> Result<Evaluation, SandboxError> {
    evaluate_code(
        &format!("h{}-lr{}", heuristic.id, lr.id),
        &heuristic.code,
        &lr.reduction_code,
        dataset,
        sandbox,
        timeout_seconds,
    )
}
