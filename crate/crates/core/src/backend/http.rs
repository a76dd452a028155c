//! OpenAI-compatible chat-completions client.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;
use tokio::time::Instant;

use super::{
    BackendError, CallTag, ChatBackend, ChatRequest, ChatResponse, RateLimiter, ResponseSource,
    RetryPolicy, Role,
};

pub const API_KEY_ENV: &str = "CAF_API_KEY";
pub const BASE_URL_ENV: &str = "CAF_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> HttpConfig {
        HttpConfig {
            base_url: base_url.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            requests_per_minute: None,
        }
    }

    /// Reads the credential from `CAF_API_KEY` and the endpoint from
    /// `CAF_BASE_URL`, falling back to `base_url` and then the public default.
    pub fn from_env(base_url: Option<String>) -> Result<HttpConfig, BackendError> {
        let api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                BackendError::Config(format!("live backend requires {API_KEY_ENV} to be set"))
            })?;
        let base_url = base_url
            .or_else(|| std::env::var(BASE_URL_ENV).ok())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        Ok(HttpConfig::new(base_url, api_key))
    }
}

pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    config: HttpConfig,
    limiter: Option<Arc<RateLimiter>>,
}

enum AttemptError {
    Transient(String),
    Fatal(BackendError),
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<HttpBackend, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        let endpoint = format!(
            "{}/v1/chat/completions",
            config.base_url.trim_end_matches('/')
        );
        let limiter = config
            .requests_per_minute
            .filter(|&n| n > 0)
            .map(|n| Arc::new(RateLimiter::per_minute(n)));
        Ok(HttpBackend {
            client,
            endpoint,
            config,
            limiter,
        })
    }

    /// Shares one limiter across several backends.
    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> HttpBackend {
        self.limiter = Some(limiter);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    async fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        let messages: Vec<_> = request
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": messages,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() || e.is_request() {
                    AttemptError::Transient(e.to_string())
                } else {
                    AttemptError::Fatal(BackendError::InvalidResponse(e.to_string()))
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            let code = status.as_u16();
            let text = response.text().await.unwrap_or_default();
            return Err(match code {
                408 | 429 | 500..=599 => AttemptError::Transient(format!("HTTP {code}: {text}")),
                401 | 403 => AttemptError::Fatal(BackendError::AuthFailure {
                    message: format!("HTTP {code}: {text}"),
                }),
                _ => AttemptError::Fatal(BackendError::Rejected {
                    status: code,
                    body: text,
                }),
            });
        }
        let parsed: CompletionBody = response
            .json()
            .await
            .map_err(|e| AttemptError::Fatal(BackendError::InvalidResponse(e.to_string())))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                AttemptError::Fatal(BackendError::InvalidResponse(
                    "choices[0].message.content missing".into(),
                ))
            })?;
        if content.is_empty() {
            return Err(AttemptError::Fatal(BackendError::InvalidResponse(
                "empty completion".into(),
            )));
        }
        Ok(content)
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn complete(
        &self,
        request: &ChatRequest,
        tag: &CallTag,
    ) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let max_attempts = self.config.retry.max_attempts();
        let mut last = String::new();
        for attempt in 0..max_attempts {
            if attempt > 0 {
                let delay = self.config.retry.delay(attempt - 1);
                tracing::warn!(%tag, attempt, ?delay, error = %last, "retrying chat completion");
                tokio::time::sleep(delay).await;
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire().await;
            }
            let started = Instant::now();
            match self.attempt(request).await {
                Ok(content) => {
                    return Ok(ChatResponse {
                        content,
                        latency: started.elapsed(),
                        source: ResponseSource::Live,
                    })
                }
                Err(AttemptError::Fatal(err)) => return Err(err),
                Err(AttemptError::Transient(msg)) => last = msg,
            }
        }
        Err(BackendError::ExhaustedRetries {
            attempts: max_attempts,
            last,
        })
    }
}
