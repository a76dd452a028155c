//! Deterministic scripted backend.
//!
//! A script maps selectors to ordered response lists:
//!
//! ```json
//! {
//!   "latency_ms": 5,
//!   "responses": { "CA:1": ["..."], "RE": ["..."] },
//!   "samples": { "s-07": { "RA:3": ["..."] } }
//! }
//! ```
//!
//! Lookup for a call tagged `(sample, role, round)` tries, in order,
//! `samples[sample]["ROLE:round"]`, `samples[sample]["ROLE"]`,
//! `responses["ROLE:round"]`, `responses["ROLE"]`. Each sample keeps its own
//! cursor into the resolved list, so one default script serves a whole batch
//! regardless of scheduling order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendError, CallTag, ChatBackend, ChatRequest, ChatResponse, ResponseSource};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default)]
    pub responses: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub samples: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl MockScript {
    pub fn from_json(json: &str) -> Result<MockScript, BackendError> {
        serde_json::from_str(json).map_err(|e| BackendError::Config(format!("mock script: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<MockScript, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    /// Adds a default response list for `selector`.
    pub fn respond(
        mut self,
        selector: &str,
        responses: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        self.responses.insert(
            selector.to_string(),
            responses.into_iter().map(Into::into).collect(),
        );
        self
    }

    /// Adds a response list for `selector` that applies to one sample only.
    pub fn respond_for(
        mut self,
        sample_id: &str,
        selector: &str,
        responses: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        self.samples
            .entry(sample_id.to_string())
            .or_default()
            .insert(
                selector.to_string(),
                responses.into_iter().map(Into::into).collect(),
            );
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency_ms = Some(latency.as_millis() as u64);
        self
    }

    fn resolve(&self, tag: &CallTag) -> Option<(String, &Vec<String>)> {
        let selector = tag.selector();
        let role = tag.role.code();
        if let Some(per_sample) = self.samples.get(&tag.sample_id) {
            for key in [selector.as_str(), role] {
                if let Some(list) = per_sample.get(key) {
                    return Some((format!("{}/{key}", tag.sample_id), list));
                }
            }
        }
        for key in [selector.as_str(), role] {
            if let Some(list) = self.responses.get(key) {
                return Some((key.to_string(), list));
            }
        }
        None
    }
}

pub struct MockBackend {
    script: MockScript,
    cursors: Mutex<HashMap<(String, String), usize>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> MockBackend {
        MockBackend {
            script,
            cursors: Mutex::new(HashMap::new()),
        }
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn complete(
        &self,
        _request: &ChatRequest,
        tag: &CallTag,
    ) -> Result<ChatResponse, BackendError> {
        let exhausted = || BackendError::ScriptExhausted {
            sample_id: tag.sample_id.clone(),
            selector: tag.selector(),
        };
        let (key, list) = self.script.resolve(tag).ok_or_else(exhausted)?;
        let content = {
            let mut cursors = self.cursors.lock().unwrap();
            let cursor = cursors.entry((tag.sample_id.clone(), key)).or_insert(0);
            let content = list.get(*cursor).cloned().ok_or_else(exhausted)?;
            *cursor += 1;
            content
        };
        let latency = Duration::from_millis(self.script.latency_ms.unwrap_or(0));
        if !latency.is_zero() {
            tokio::time::sleep(latency).await;
        }
        Ok(ChatResponse {
            content,
            latency,
            source: ResponseSource::Mock,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::CallRole;
    use crate::domain::AgentId;

    fn tag(sample: &str, agent: AgentId, round: u8) -> CallTag {
        CallTag::new(sample, CallRole::Agent(agent), Some(round))
    }

    #[tokio::test]
    async fn returns_scripted_content_verbatim() {
        let script = MockScript::default().respond("CA:1", ["VERDICT: IRONIC ..."]);
        let mock = MockBackend::new(script);
        let req = ChatRequest::user("m", "p");
        let resp = mock
            .complete(&req, &tag("s", AgentId::Context, 1))
            .await
            .unwrap();
        assert_eq!(resp.content, "VERDICT: IRONIC ...");
        assert_eq!(resp.source, ResponseSource::Mock);
        let err = mock
            .complete(&req, &tag("s", AgentId::Context, 1))
            .await
            .unwrap_err();
        assert!(matches!(err, BackendError::ScriptExhausted { .. }));
    }

    #[tokio::test]
    async fn cursors_are_per_sample_and_overrides_win() {
        let script =
            MockScript::default()
                .respond("SA", ["a", "b"])
                .respond_for("s2", "SA:2", ["override"]);
        let mock = MockBackend::new(script);
        let req = ChatRequest::user("m", "p");
        let get = |s: &'static str, r: u8| {
            let mock = &mock;
            let req = &req;
            async move {
                mock.complete(req, &tag(s, AgentId::Semantic, r))
                    .await
                    .map(|r| r.content)
            }
        };
        assert_eq!(get("s1", 1).await.unwrap(), "a");
        assert_eq!(get("s2", 1).await.unwrap(), "a");
        assert_eq!(get("s1", 2).await.unwrap(), "b");
        assert_eq!(get("s2", 2).await.unwrap(), "override");
        assert!(get("s3", 3).await.is_ok());
    }

    #[tokio::test]
    async fn unknown_selector_is_exhausted() {
        let mock = MockBackend::new(MockScript::default());
        let err = mock
            .complete(
                &ChatRequest::user("m", "p"),
                &CallTag::new("x", CallRole::Evaluator, None),
            )
            .await
            .unwrap_err();
        assert_eq!(
            err,
            BackendError::ScriptExhausted {
                sample_id: "x".into(),
                selector: "RE".into()
            }
        );
    }

    #[test]
    fn script_json_round_trip() {
        let script = MockScript::default()
            .respond("RE", ["CONFIDENCE: HIGH"])
            .respond_for("s", "CA:1", [""]);
        assert_eq!(MockScript::from_json(&script.to_json()).unwrap(), script);
    }
}
