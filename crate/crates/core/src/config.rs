//! The run configuration file (TOML).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cop::CopKind;
use crate::evolution::EvolutionConfig;
use crate::llm::LlmConfig;
use crate::sandbox::{FixtureSandbox, ProcessSandbox, Sandbox};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Search settings that differ from the per-problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionOverrides {
    pub population_size: Option<usize>,
    pub active_reductions: Option<usize>,
    pub candidate_reductions: Option<usize>,
    pub top_l: Option<usize>,
    pub stagnation_threshold: Option<u32>,
    pub generations: Option<usize>,
    pub timeout_seconds: Option<f64>,
    pub seed: Option<u64>,
    pub max_retries: Option<u32>,
    pub workers: Option<usize>,
}

impl EvolutionOverrides {
    pub fn apply(&self, kind: CopKind) -> EvolutionConfig {
        let mut c = EvolutionConfig::for_kind(kind);
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(
            population_size,
            active_reductions,
            candidate_reductions,
            top_l,
            stagnation_threshold,
            generations,
            timeout_seconds,
            seed,
            max_retries,
            workers
        );
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxBackend {
    /// In-process execution of fixture programs.
    #[default]
    Fixture,
    /// External runner speaking the JSON-lines protocol.
    Process,
}

impl std::str::FromStr for SandboxBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture" => Ok(SandboxBackend::Fixture),
            "process" => Ok(SandboxBackend::Process),
            _ => Err(format!("unknown sandbox `{s}` (expected fixture or process)")),
        }
    }
}

fn default_program() -> String {
    "python3".into()
}
fn default_grace() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxConfig {
    #[serde(default)]
    pub backend: SandboxBackend,
    /// Runner executable for the process backend.
    #[serde(default = "default_program")]
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Extra time before a runner that overran its budget is killed.
    #[serde(default = "default_grace")]
    pub grace_seconds: f64,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            backend: SandboxBackend::default(),
            program: default_program(),
            args: Vec::new(),
            grace_seconds: default_grace(),
        }
    }
}

impl SandboxConfig {
    pub fn build(&self) -> Box<dyn Sandbox> {
        match self.backend {
            SandboxBackend::Fixture => Box::new(FixtureSandbox::new()),
            SandboxBackend::Process => Box::new(
                ProcessSandbox::new(&self.program)
                    .with_args(self.args.clone())
                    .with_grace(Duration::from_secs_f64(self.grace_seconds.max(0.0))),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Dataset file; relative paths are taken from the config file's folder.
    pub dataset: PathBuf,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Transcript to replay from.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    #[serde(default)]
    pub evolution: EvolutionOverrides,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub sandbox: SandboxConfig,
}

impl RunConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.out = cfg.out.map(|p| base.join(p));
        cfg.transcript = cfg.transcript.map(|p| base.join(p));
        Ok(cfg)
    }

    /// Search settings for `kind` with this file's overrides, checked.
    pub fn evolution_for(&self, kind: CopKind) -> Result<EvolutionConfig, ConfigError> {
        let c = self.evolution.apply(kind);
        c.check().map_err(ConfigError::Invalid)?;
        Ok(c)
    }
}
