//! Chat-completion access: live HTTP, transcript replay, or a programmable
//! mock, behind one client type.

mod extract;
mod live;
mod mock;
mod transcript;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{
    defined_functions, extract_braced_description, extract_code, parse_double_braced,
    ExtractError,
};
pub use mock::{MockReply, MockResponder};
pub use transcript::{
    request_digest, ChatExchange, ChatParams, ReplayMode, Transcript, TranscriptHeader, Usage,
    TRANSCRIPT_FORMAT,
};

use live::LiveBackend;
use transcript::{Recorder, Replayer};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("the live backend needs an endpoint URL")]
    MissingEndpoint,
    #[error("malformed chat response: {0}")]
    MalformedResponse(String),
    #[error("chat response carried no content")]
    EmptyResponse,
    #[error("replay digest mismatch at sequence index {seq}: transcript has {expected}, request is {found}")]
    DigestMismatch {
        seq: usize,
        expected: String,
        found: String,
    },
    #[error("transcript exhausted at sequence index {seq}")]
    ReplayExhausted { seq: usize },
    #[error("no recorded response for request digest {0}")]
    ReplayMissing(String),
    #[error("transcript was recorded with {recorded:?}, client uses {current:?}")]
    ConfigDrift {
        recorded: ChatParams,
        current: ChatParams,
    },
    #[error("no mock rule matches prompt starting with {0:?}")]
    MockMiss(String),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Outcome of a prompt whose answer must pass a parser.
#[derive(Debug, Error)]
pub enum AskError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no usable answer after {attempts} attempts; last problem: {last}")]
    Exhausted { attempts: u32, last: String },
}

impl LlmError {
    /// Errors that mean no further model calls can succeed in this run.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, LlmError::EmptyResponse | LlmError::MalformedResponse(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Live,
    Replay,
    #[default]
    Mock,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Backend::Live),
            "replay" => Ok(Backend::Replay),
            "mock" => Ok(Backend::Mock),
            _ => Err(format!("unknown backend `{s}` (expected live, replay or mock)")),
        }
    }
}

fn default_model() -> String {
    "gpt-4o-mini".into()
}
fn default_temperature() -> f64 {
    1.0
}
fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    120.0
}
fn default_backoff() -> f64 {
    1.0
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Full chat-completions URL, e.g. `https://api.openai.com/v1/chat/completions`.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the key. The key itself is
    /// never stored.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    /// First backoff delay; doubles on each retry.
    #[serde(default = "default_backoff")]
    pub retry_backoff_secs: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub replay_mode: ReplayMode,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: Backend::default(),
            model: default_model(),
            temperature: default_temperature(),
            endpoint: None,
            api_key_env: default_key_env(),
            max_retries: default_retries(),
            request_timeout_secs: default_timeout(),
            retry_backoff_secs: default_backoff(),
            max_in_flight: default_in_flight(),
            replay_mode: ReplayMode::default(),
        }
    }
}

impl LlmConfig {
    pub fn params(&self) -> ChatParams {
        ChatParams::new(self.model.clone(), self.temperature)
    }
}

#[derive(Debug)]
enum Source {
    Live(LiveBackend),
    Replay(Replayer),
    Mock(MockResponder),
}

/// Shareable across threads. Sequential replay expects a single consumer.
#[derive(Debug)]
pub struct LlmClient {
    source: Source,
    params: ChatParams,
    recorder: Option<Recorder>,
    transcript_id: Option<String>,
    calls: AtomicUsize,
}

impl LlmClient {
    pub fn live(cfg: &LlmConfig) -> Result<Self, LlmError> {
        Ok(Self::from_source(Source::Live(LiveBackend::new(cfg)?), cfg.params()))
    }

    pub fn mock(params: ChatParams, responder: MockResponder) -> Self {
        Self::from_source(Source::Mock(responder), params)
    }

    /// Refuses transcripts recorded under different model settings.
    pub fn replay(params: ChatParams, transcript: Transcript, mode: ReplayMode) -> Result<Self, LlmError> {
        Self::replay_from(params, transcript, mode, 0)
    }

    /// Replay that treats the first `skip` exchanges as consumed, for
    /// resuming a run from a checkpoint.
    pub fn replay_from(
        params: ChatParams,
        transcript: Transcript,
        mode: ReplayMode,
        skip: usize,
    ) -> Result<Self, LlmError> {
        if transcript.header.params != params {
            return Err(LlmError::ConfigDrift {
                recorded: transcript.header.params,
                current: params,
            });
        }
        let id = transcript.header.id.clone();
        let mut client = Self::from_source(Source::Replay(Replayer::new(transcript, mode, skip)), params);
        client.transcript_id = Some(id);
        client.calls = AtomicUsize::new(skip);
        Ok(client)
    }

    fn from_source(source: Source, params: ChatParams) -> Self {
        Self {
            source,
            params,
            recorder: None,
            transcript_id: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Logs every exchange, to `path` as well when given. The file must not
    /// exist yet.
    pub fn recording(mut self, path: Option<&Path>) -> Result<Self, LlmError> {
        let recorder = Recorder::new(&self.params, path)?;
        self.transcript_id = Some(recorder.snapshot().header.id);
        self.recorder = Some(recorder);
        Ok(self)
    }

    pub fn params(&self) -> &ChatParams {
        &self.params
    }

    pub fn transcript_id(&self) -> Option<&str> {
        self.transcript_id.as_deref()
    }

    /// Everything recorded so far, when recording.
    pub fn recorded(&self) -> Option<Transcript> {
        self.recorder.as_ref().map(Recorder::snapshot)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Live clients benefit from concurrent requests; the others answer
    /// instantly and are queried in a fixed order to stay reproducible.
    pub fn is_live(&self) -> bool {
        matches!(self.source, Source::Live(_))
    }

    /// Sends `prompt` and parses the answer, retrying up to `retries` times
    /// with the failure appended to the original prompt. Fatal client
    /// errors are returned at once.
    pub fn ask<T>(
        &self,
        prompt: &str,
        retries: u32,
        mut parse: impl FnMut(&str) -> Result<T, String>,
    ) -> Result<T, AskError> {
        let mut current = prompt.to_string();
        let mut last = String::new();
        for _ in 0..=retries {
            match self.complete(&current) {
                Ok(response) => match parse(&response) {
                    Ok(v) => return Ok(v),
                    Err(e) => last = e,
                },
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => last = e.to_string(),
            }
            current = crate::prompts::with_feedback(prompt, &last);
        }
        Err(AskError::Exhausted {
            attempts: retries + 1,
            last,
        })
    }

    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        if prompt.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = request_digest(prompt, &self.params);
        let (response, usage) = match &self.source {
            Source::Live(live) => live.complete(prompt)?,
            Source::Replay(r) => (r.next(&digest)?, None),
            Source::Mock(m) => (
                m.answer(prompt)
                    .ok_or_else(|| LlmError::MockMiss(prompt.chars().take(60).collect()))?,
                None,
            ),
        };
        if let Some(rec) = &self.recorder {
            rec.append(prompt, digest, &response, usage)?;
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChatParams {
        ChatParams::new("test-model", 1.0)
    }

    fn recorded_pair() -> Transcript {
        let client = LlmClient::mock(params(), MockResponder::new().on("a", MockReply::fixed("A")).on("b", MockReply::fixed("B")))
            .recording(None)
            .unwrap();
        client.complete("a?").unwrap();
        client.complete("b?").unwrap();
        client.recorded().unwrap()
    }

    #[test]
    fn replay_returns_recorded_bytes() {
        let t = recorded_pair();
        let r = LlmClient::replay(params(), t, ReplayMode::Sequential).unwrap();
        assert_eq!(r.complete("a?").unwrap(), "A");
        assert_eq!(r.complete("b?").unwrap(), "B");
        assert!(matches!(r.complete("a?"), Err(LlmError::ReplayExhausted { seq: 2 })));
    }

    #[test]
    fn one_byte_difference_is_caught() {
        let r = LlmClient::replay(params(), recorded_pair(), ReplayMode::Sequential).unwrap();
        r.complete("a?").unwrap();
        let err = r.complete("b!").unwrap_err();
        assert!(matches!(err, LlmError::DigestMismatch { seq: 1, .. }));
        assert!(err.to_string().contains("sequence index 1"));
    }

    #[test]
    fn keyed_replay_ignores_order() {
        let r = LlmClient::replay(params(), recorded_pair(), ReplayMode::Keyed).unwrap();
        assert_eq!(r.complete("b?").unwrap(), "B");
        assert_eq!(r.complete("a?").unwrap(), "A");
        assert!(matches!(r.complete("a?"), Err(LlmError::ReplayMissing(_))));
    }

    #[test]
    fn drift_is_refused() {
        let t = recorded_pair();
        let other = ChatParams::new("test-model", 0.5);
        assert!(matches!(
            LlmClient::replay(other, t, ReplayMode::Sequential),
            Err(LlmError::ConfigDrift { .. })
        ));
    }

    #[test]
    fn ask_retries_with_feedback() {
        let c = LlmClient::mock(
            params(),
            MockResponder::new()
                .on("previous answer could not be used: no number", MockReply::fixed("42"))
                .otherwise(MockReply::fixed("none")),
        )
        .recording(None)
        .unwrap();
        let n: u32 = c
            .ask("give a number", 3, |r| r.parse().map_err(|_| "no number".to_string()))
            .unwrap();
        assert_eq!(n, 42);
        let t = c.recorded().unwrap();
        assert_eq!(t.entries.len(), 2);
        assert!(t.entries[1].prompt.starts_with("give a number\n\n"));

        let c = LlmClient::mock(params(), MockResponder::always("none"));
        let err = c.ask("x", 3, |_| Err::<(), _>("bad".to_string())).unwrap_err();
        assert!(matches!(err, AskError::Exhausted { attempts: 4, .. }));
        assert_eq!(c.calls(), 4);
        // a missing mock rule is fatal and not retried
        let c = LlmClient::mock(params(), MockResponder::new());
        assert!(matches!(c.ask("x", 3, |_| Ok(())), Err(AskError::Llm(_))));
        assert_eq!(c.calls(), 1);
    }

    #[test]
    fn mock_miss_and_empty_prompt() {
        let c = LlmClient::mock(params(), MockResponder::new());
        assert!(matches!(c.complete("x"), Err(LlmError::MockMiss(_))));
        assert!(matches!(c.complete(""), Err(LlmError::EmptyPrompt)));
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg: LlmConfig = toml::from_str("backend = \"replay\"").unwrap();
        assert_eq!(cfg.temperature, 1.0);
        assert_eq!(cfg.max_retries, 3);
        assert_eq!(cfg.backend, Backend::Replay);
        assert!(toml::from_str::<LlmConfig>("api_key = \"sk\"").is_err());
    }

    #[test]
    fn live_needs_key_and_endpoint() {
        let cfg = LlmConfig {
            backend: Backend::Live,
            api_key_env: "REDSEARCH_TEST_SURELY_UNSET_VAR".into(),
            endpoint: Some("http://127.0.0.1:9".into()),
            ..LlmConfig::default()
        };
        let err = LlmClient::live(&cfg).unwrap_err();
        assert!(err.to_string().contains("REDSEARCH_TEST_SURELY_UNSET_VAR"));
        let cfg = LlmConfig { endpoint: None, ..cfg };
        assert!(matches!(LlmClient::live(&cfg), Err(LlmError::MissingEndpoint)));
    }
}
