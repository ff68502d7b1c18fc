//! OpenAI-compatible chat-completions over HTTP.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{LlmConfig, LlmError, Usage};

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateTicket<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateTicket(self)
    }
}

struct GateTicket<'a>(&'a Gate);

impl Drop for GateTicket<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub(crate) struct LiveBackend {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    model: String,
    temperature: f64,
    max_retries: u32,
    backoff_base: Duration,
    gate: Gate,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

enum Attempt {
    Done(String, Option<Usage>),
    Transient(LlmError),
    Fatal(LlmError),
}

impl LiveBackend {
    pub(crate) fn new(cfg: &LlmConfig) -> Result<Self, LlmError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .filter(|e| !e.trim().is_empty())
            .ok_or(LlmError::MissingEndpoint)?;
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::MissingApiKey(cfg.api_key_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.request_timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            endpoint,
            api_key,
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_retries: cfg.max_retries,
            backoff_base: Duration::from_secs_f64(cfg.retry_backoff_secs),
            gate: Gate::new(cfg.max_in_flight),
        })
    }

    pub(crate) fn complete(&self, prompt: &str) -> Result<(String, Option<Usage>), LlmError> {
        let _ticket = self.gate.acquire();
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text, usage) => return Ok((text, usage)),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(e) if attempt >= self.max_retries => return Err(e),
                Attempt::Transient(e) => {
                    let wait = self.backoff_base * 2u32.pow(attempt);
                    log::warn!("chat request failed ({e}); retrying in {wait:?}");
                    thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let resp = match self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
        {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Transient(LlmError::Timeout),
            Err(e) if e.is_connect() || e.is_request() => {
                return Attempt::Transient(LlmError::Transport(e.to_string()))
            }
            Err(e) => return Attempt::Fatal(LlmError::Transport(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Transient(LlmError::Timeout),
            Err(e) => return Attempt::Transient(LlmError::Transport(e.to_string())),
        };
        if !status.is_success() {
            let err = LlmError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            };
            return if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            };
        }
        let parsed: WireResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return Attempt::Fatal(LlmError::MalformedResponse(e.to_string())),
        };
        match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
            Some(content) if !content.is_empty() => Attempt::Done(content, parsed.usage),
            _ => Attempt::Fatal(LlmError::EmptyResponse),
        }
    }
}
