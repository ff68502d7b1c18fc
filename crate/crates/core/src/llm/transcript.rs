use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;

pub const TRANSCRIPT_FORMAT: u32 = 1;

/// Model settings that take part in the request digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
}

impl ChatParams {
    pub fn new(model: impl Into<String>, temperature: f64) -> Self {
        Self {
            model: model.into(),
            temperature,
        }
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("model={}\ntemperature={:?}\n", self.model, self.temperature));
        hex::encode(h.finalize())
    }
}

/// Hash of a request: prompt with newlines normalized to `\n`, plus the
/// model name and temperature.
pub fn request_digest(prompt: &str, params: &ChatParams) -> String {
    let prompt = prompt.replace("\r\n", "\n").replace('\r', "\n");
    let mut h = Sha256::new();
    h.update(format!("model={}\ntemperature={:?}\n\n", params.model, params.temperature));
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub transcript_format: u32,
    /// Stable identifier carried into run results.
    pub id: String,
    pub config_digest: String,
    pub params: ChatParams,
    pub created_at: String,
}

impl TranscriptHeader {
    pub fn new(params: &ChatParams) -> Self {
        let created_at = chrono::Utc::now().to_rfc3339();
        let config_digest = params.digest();
        let id = hex::encode(Sha256::digest(format!("{config_digest}@{created_at}")))[..16].to_string();
        Self {
            transcript_format: TRANSCRIPT_FORMAT,
            id,
            config_digest,
            params: params.clone(),
            created_at,
        }
    }
}

/// One request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub seq: usize,
    pub digest: String,
    pub prompt: String,
    pub response: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub entries: Vec<ChatExchange>,
}

impl Transcript {
    pub fn new(params: &ChatParams) -> Self {
        Self {
            header: TranscriptHeader::new(params),
            entries: Vec::new(),
        }
    }

    pub fn to_jsonl(&self) -> Result<String, LlmError> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: TranscriptHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| LlmError::Transcript("empty transcript".into()))?,
        )?;
        if header.transcript_format != TRANSCRIPT_FORMAT {
            return Err(LlmError::Transcript(format!(
                "unsupported transcript format {}",
                header.transcript_format
            )));
        }
        let entries = lines
            .map(serde_json::from_str)
            .collect::<Result<Vec<ChatExchange>, _>>()?;
        for (i, e) in entries.iter().enumerate() {
            if e.seq != i {
                return Err(LlmError::Transcript(format!(
                    "entry {i} carries sequence index {}",
                    e.seq
                )));
            }
        }
        Ok(Self { header, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }
}

/// Append-only log of exchanges, optionally mirrored line by line to a file.
#[derive(Debug)]
pub(crate) struct Recorder {
    state: Mutex<(Transcript, Option<File>)>,
}

impl Recorder {
    pub(crate) fn new(params: &ChatParams, path: Option<&Path>) -> Result<Self, LlmError> {
        let transcript = Transcript::new(params);
        let file = match path {
            Some(p) => {
                let mut f = OpenOptions::new().write(true).create_new(true).open(p)?;
                writeln!(f, "{}", serde_json::to_string(&transcript.header)?)?;
                Some(f)
            }
            None => None,
        };
        Ok(Self {
            state: Mutex::new((transcript, file)),
        })
    }

    pub(crate) fn append(
        &self,
        prompt: &str,
        digest: String,
        response: &str,
        usage: Option<Usage>,
    ) -> Result<(), LlmError> {
        let mut guard = self.state.lock().unwrap();
        let (transcript, file) = &mut *guard;
        let entry = ChatExchange {
            seq: transcript.entries.len(),
            digest,
            prompt: prompt.to_string(),
            response: response.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            usage,
        };
        if let Some(f) = file {
            writeln!(f, "{}", serde_json::to_string(&entry)?)?;
            f.flush()?;
        }
        transcript.entries.push(entry);
        Ok(())
    }

    pub(crate) fn snapshot(&self) -> Transcript {
        self.state.lock().unwrap().0.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Requests must arrive in recorded order.
    #[default]
    Sequential,
    /// Requests are matched by digest; identical prompts are served in
    /// recorded order.
    Keyed,
}

#[derive(Debug)]
pub(crate) enum Replayer {
    Sequential {
        entries: Vec<ChatExchange>,
        cursor: Mutex<usize>,
    },
    Keyed(Mutex<HashMap<String, VecDeque<String>>>),
}

impl Replayer {
    /// The first `skip` exchanges count as already served.
    pub(crate) fn new(transcript: Transcript, mode: ReplayMode, skip: usize) -> Self {
        match mode {
            ReplayMode::Sequential => Replayer::Sequential {
                entries: transcript.entries,
                cursor: Mutex::new(skip),
            },
            ReplayMode::Keyed => {
                let mut map: HashMap<String, VecDeque<String>> = HashMap::new();
                for e in transcript.entries.into_iter().skip(skip) {
                    map.entry(e.digest).or_default().push_back(e.response);
                }
                Replayer::Keyed(Mutex::new(map))
            }
        }
    }

    pub(crate) fn next(&self, digest: &str) -> Result<String, LlmError> {
        match self {
            Replayer::Sequential { entries, cursor } => {
                let mut cursor = cursor.lock().unwrap();
                let seq = *cursor;
                let entry = entries.get(seq).ok_or(LlmError::ReplayExhausted { seq })?;
                if entry.digest != digest {
                    return Err(LlmError::DigestMismatch {
                        seq,
                        expected: entry.digest.clone(),
                        found: digest.to_string(),
                    });
                }
                *cursor += 1;
                Ok(entry.response.clone())
            }
            Replayer::Keyed(map) => map
                .lock()
                .unwrap()
                .get_mut(digest)
                .and_then(VecDeque::pop_front)
                .ok_or_else(|| LlmError::ReplayMissing(digest.to_string())),
        }
    }
}
