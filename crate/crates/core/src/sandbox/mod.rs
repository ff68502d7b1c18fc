//! Engine side of guest-code execution.
//!
//! Generated reductions and heuristics run outside the engine. A runner
//! speaks newline-delimited JSON: it first writes `{"protocol_version": 1}`,
//! then reads one [`ExecRequest`] line and answers with one
//! [`ExecResponse`] line. [`ProcessSandbox`] drives such a runner as a
//! subprocess; [`FixtureSandbox`] executes known fixture programs natively
//! for tests and offline demos.

pub mod codec;
mod fixture;
mod process;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cop::{CopKind, Instance};
use crate::prompts::{INSTANCE_MAP, SOLUTION_MAP, SOLVE_ENTRY};

pub use fixture::{FixtureSandbox, FIXTURE_MARKER};
pub use process::ProcessSandbox;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryNames {
    pub instance_map: String,
    pub solution_map: String,
    pub solve: String,
}

impl Default for EntryNames {
    fn default() -> Self {
        Self {
            instance_map: INSTANCE_MAP.into(),
            solution_map: SOLUTION_MAP.into(),
            solve: SOLVE_ENTRY.into(),
        }
    }
}

/// An instance plus the positional arguments for the instance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuestInstance {
    #[serde(flatten)]
    pub instance: Instance,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecRequest {
    pub id: String,
    pub cop_kind: CopKind,
    pub reduction_code: String,
    pub heuristic_code: String,
    pub entry: EntryNames,
    pub instances: Vec<GuestInstance>,
    /// Budget for the whole batch.
    pub timeout_seconds: f64,
}

impl ExecRequest {
    pub fn new(
        id: impl Into<String>,
        reduction_code: &str,
        heuristic_code: &str,
        instances: &[Instance],
        timeout_seconds: f64,
    ) -> Result<Self, SandboxError> {
        let first = instances
            .first()
            .ok_or_else(|| SandboxError::BadRequest("no instances".into()))?;
        if instances.iter().any(|i| i.kind() != first.kind()) {
            return Err(SandboxError::BadRequest("instances of mixed kinds".into()));
        }
        if !(timeout_seconds > 0.0) {
            return Err(SandboxError::BadRequest(format!(
                "timeout must be positive, got {timeout_seconds}"
            )));
        }
        Ok(Self {
            id: id.into(),
            cop_kind: first.kind(),
            reduction_code: reduction_code.to_string(),
            heuristic_code: heuristic_code.to_string(),
            entry: EntryNames::default(),
            instances: instances
                .iter()
                .map(|i| GuestInstance {
                    instance: i.clone(),
                    args: codec::guest_args(i),
                })
                .collect(),
            timeout_seconds,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Exception,
    BadShape,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuestError {
    pub class: ErrorClass,
    pub message: String,
    #[serde(default)]
    pub traceback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceOutcome {
    Solution(Value),
    Error(GuestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchOutcome {
    Completed,
    Timeout,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResponse {
    pub id: String,
    #[serde(default)]
    pub outcomes: Vec<InstanceOutcome>,
    pub batch: BatchOutcome,
    #[serde(default)]
    pub wall_time_seconds: f64,
    /// Load or parse error for crashed batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ExecResponse {
    pub fn timeout(id: &str, wall: f64) -> Self {
        Self {
            id: id.to_string(),
            outcomes: Vec::new(),
            batch: BatchOutcome::Timeout,
            wall_time_seconds: wall,
            message: None,
        }
    }

    pub fn crashed(id: &str, message: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            outcomes: Vec::new(),
            batch: BatchOutcome::Crashed,
            wall_time_seconds: 0.0,
            message: Some(message.into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("could not start runner: {0}")]
    Spawn(std::io::Error),
    #[error("runner protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Executes guest batches. Implementations must be usable from several
/// worker threads at once.
pub trait Sandbox: Send + Sync {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResponse, SandboxError>;
}

impl<S: Sandbox + ?Sized> Sandbox for Box<S> {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResponse, SandboxError> {
        (**self).execute(request)
    }
}

impl<S: Sandbox + ?Sized> Sandbox for std::sync::Arc<S> {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResponse, SandboxError> {
        (**self).execute(request)
    }
}
