//! Chat-completion backends: live HTTP, scripted mock, and record/replay.
//!
//! Every model call in the pipeline goes through [`ChatBackend::complete`].
//! A [`CallTag`] travels alongside each request so the mock backend can pick
//! the scripted response for the calling agent and round; the tag never
//! influences the request digest.

mod cache;
mod http;
mod mock;
mod ratelimit;
mod retry;
mod search;

use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::AgentId;

pub use cache::{cache_key, CacheEntry, RecordingBackend, ReplayBackend, ReplayStore};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use mock::{MockBackend, MockScript};
pub use ratelimit::RateLimiter;
pub use retry::RetryPolicy;
pub use search::{
    search, Document, HttpSearchProvider, NullSearch, ScriptedSearch, SearchError, SearchProvider,
    SearchResult,
};

pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Message {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        messages: Vec<Message>,
    ) -> Result<ChatRequest, BackendError> {
        let request = ChatRequest {
            model: model.into(),
            temperature: 0.0,
            messages,
        };
        request.validate()?;
        Ok(request)
    }

    /// Single user-message request at temperature 0.
    pub fn user(model: impl Into<String>, content: impl Into<String>) -> ChatRequest {
        ChatRequest {
            model: model.into(),
            temperature: 0.0,
            messages: vec![Message::user(content)],
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<ChatRequest, BackendError> {
        self.temperature = temperature;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.first() {
            None => return Err(BackendError::InvalidRequest("no messages".into())),
            Some(m) if m.role == Role::Assistant => {
                return Err(BackendError::InvalidRequest(
                    "first message must be system or user".into(),
                ))
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Content of the last message; prompts in this crate are single-message.
    pub fn prompt(&self) -> &str {
        self.messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    Live,
    Replay,
    Mock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub latency: Duration,
    pub source: ResponseSource,
}

/// Which pipeline component is issuing a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Agent(AgentId),
    Arbiter,
    Justifier,
    Evaluator,
    SearchSummary,
    Baseline,
}

impl CallRole {
    pub fn code(self) -> &'static str {
        match self {
            CallRole::Agent(a) => a.code(),
            CallRole::Arbiter => "DA",
            CallRole::Justifier => "DJ",
            CallRole::Evaluator => "RE",
            CallRole::SearchSummary => "SEARCH",
            CallRole::Baseline => "BASELINE",
        }
    }
}

/// Out-of-band call metadata: sample, caller role, and round where relevant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallTag {
    pub sample_id: String,
    pub role: CallRole,
    pub round: Option<u8>,
}

impl CallTag {
    pub fn new(sample_id: impl Into<String>, role: CallRole, round: Option<u8>) -> CallTag {
        CallTag {
            sample_id: sample_id.into(),
            role,
            round,
        }
    }

    /// Script selector such as `CA:1`, `DA:2` or `RE`.
    pub fn selector(&self) -> String {
        match self.round {
            Some(r) => format!("{}:{}", self.role.code(), r),
            None => self.role.code().to_string(),
        }
    }
}

impl fmt::Display for CallTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.sample_id, self.selector())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries { attempts: u32, last: String },
    #[error("replay store has no entry for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("authentication failed: {message}")]
    AuthFailure { message: String },
    #[error("mock script exhausted for {selector} (sample {sample_id})")]
    ScriptExhausted { sample_id: String, selector: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BackendError {
    fn from(err: std::io::Error) -> Self {
        BackendError::Io(err.to_string())
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(
        &self,
        request: &ChatRequest,
        tag: &CallTag,
    ) -> Result<ChatResponse, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn complete(
        &self,
        request: &ChatRequest,
        tag: &CallTag,
    ) -> Result<ChatResponse, BackendError> {
        (**self).complete(request, tag).await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Record,
    Replay,
    Mock,
}

impl std::str::FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendMode::Live),
            "record" => Ok(BackendMode::Record),
            "replay" => Ok(BackendMode::Replay),
            "mock" => Ok(BackendMode::Mock),
            other => Err(format!(
                "unknown backend mode {other:?} (expected live, record, replay or mock)"
            )),
        }
    }
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendMode::Live => "live",
            BackendMode::Record => "record",
            BackendMode::Replay => "replay",
            BackendMode::Mock => "mock",
        })
    }
}
