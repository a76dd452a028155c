//! Per-sample execution trace.
//!
//! Every backend call made on behalf of a sample goes through
//! [`TraceRecorder::complete`], which appends a [`TraceEvent`] with the
//! request digest and latency. Timestamps come from the tokio clock so a
//! paused runtime yields reproducible traces.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::time::Instant;

use crate::backend::{
    cache_key, BackendError, CallRole, CallTag, ChatBackend, ChatRequest, ChatResponse,
    ResponseSource,
};
use crate::domain::{AgentId, Decision, Judgment, ReEvaluation, Verdict};
use crate::error::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    IndependentRound,
    CollaborativeRound,
    InitialDecision,
    Evaluation,
    RefinementRound,
    FinalDecision,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    StageEntered {
        stage: PipelineStage,
    },
    BackendCall {
        selector: String,
        digest: String,
        latency_ms: f64,
        source: ResponseSource,
    },
    BackendFailure {
        selector: String,
        digest: String,
        error: BackendError,
    },
    ParseFailure {
        selector: String,
        detail: String,
    },
    AgentJudgment {
        judgment: Judgment,
        backend_calls: u32,
    },
    Search {
        query: String,
        documents: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Decision {
        decision: Decision,
        backend_calls: u32,
    },
    Evaluation {
        evaluation: ReEvaluation,
        backend_calls: u32,
        degraded: bool,
    },
    BaselinePrediction {
        mode: String,
        verdict: Verdict,
        backend_calls: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u32,
    /// Offset from the start of the sample.
    pub at_ms: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub template_version: String,
    pub events: Vec<TraceEvent>,
    pub total_backend_calls: u32,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<PipelineError>,
}

impl PipelineTrace {
    pub fn wall_time(&self) -> Duration {
        Duration::from_secs_f64(self.wall_time_ms / 1000.0)
    }

    pub fn backend_call_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::BackendCall { .. }))
            .count()
    }

    pub fn stages(&self) -> Vec<PipelineStage> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::StageEntered { stage } => Some(stage),
                _ => None,
            })
            .collect()
    }

    pub fn judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::AgentJudgment { judgment, .. } => Some(judgment),
            _ => None,
        })
    }

    /// The agent's judgment for a round, if the trace holds one.
    pub fn judgment(&self, agent: AgentId, round: u8) -> Option<&Judgment> {
        self.judgments()
            .find(|j| j.agent == agent && j.round.get() == round)
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Decision> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::Decision { decision, .. } => Some(decision),
            _ => None,
        })
    }

    pub fn evaluation(&self) -> Option<&ReEvaluation> {
        self.events.iter().find_map(|e| match &e.kind {
            EventKind::Evaluation { evaluation, .. } => Some(evaluation),
            _ => None,
        })
    }

    /// Number of backend calls implied by the per-component summaries
    /// (judgments, decisions, evaluation, search, baseline prompts). Equals
    /// `total_backend_calls` for every completed pipeline.
    pub fn attributed_backend_calls(&self) -> u32 {
        self.events
            .iter()
            .map(|e| match &e.kind {
                EventKind::AgentJudgment { backend_calls, .. }
                | EventKind::Decision { backend_calls, .. }
                | EventKind::Evaluation { backend_calls, .. }
                | EventKind::BaselinePrediction { backend_calls, .. } => *backend_calls,
                _ => 0,
            })
            .sum()
    }

    pub fn calls_with_role(&self, role: CallRole) -> usize {
        let code = role.code();
        self.events
            .iter()
            .filter(|e| match &e.kind {
                EventKind::BackendCall { selector, .. } => selector.split(':').next() == Some(code),
                _ => false,
            })
            .count()
    }
}

/// Milliseconds at microsecond resolution.
fn millis(d: Duration) -> f64 {
    d.as_micros() as f64 / 1000.0
}

#[derive(Debug)]
struct Inner {
    events: Vec<TraceEvent>,
    calls: u32,
}

/// Shared, append-only event sink for one sample's execution.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    sample_id: Arc<str>,
    start: Instant,
    inner: Arc<Mutex<Inner>>,
}

impl TraceRecorder {
    pub fn new(sample_id: &str) -> TraceRecorder {
        TraceRecorder {
            sample_id: Arc::from(sample_id),
            start: Instant::now(),
            inner: Arc::new(Mutex::new(Inner {
                events: Vec::new(),
                calls: 0,
            })),
        }
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn tag(&self, role: CallRole, round: Option<u8>) -> CallTag {
        CallTag::new(&*self.sample_id, role, round)
    }

    pub fn record(&self, kind: EventKind) {
        let at_ms = millis(self.start.elapsed());
        let mut inner = self.inner.lock().unwrap();
        if matches!(kind, EventKind::BackendCall { .. }) {
            inner.calls += 1;
        }
        let seq = inner.events.len() as u32;
        inner.events.push(TraceEvent { seq, at_ms, kind });
    }

    pub fn stage(&self, stage: PipelineStage) {
        self.record(EventKind::StageEntered { stage });
    }

    /// Backend calls recorded so far.
    pub fn calls(&self) -> u32 {
        self.inner.lock().unwrap().calls
    }

    /// Issues one backend call and records its outcome.
    pub async fn complete(
        &self,
        backend: &dyn ChatBackend,
        request: &ChatRequest,
        role: CallRole,
        round: Option<u8>,
    ) -> Result<ChatResponse, BackendError> {
        let tag = self.tag(role, round);
        let digest = cache_key(request);
        match backend.complete(request, &tag).await {
            Ok(resp) => {
                self.record(EventKind::BackendCall {
                    selector: tag.selector(),
                    digest,
                    latency_ms: millis(resp.latency),
                    source: resp.source,
                });
                Ok(resp)
            }
            Err(error) => {
                self.record(EventKind::BackendFailure {
                    selector: tag.selector(),
                    digest,
                    error: error.clone(),
                });
                Err(error)
            }
        }
    }

    pub fn finish(
        &self,
        template_version: impl Into<String>,
        failure: Option<PipelineError>,
    ) -> PipelineTrace {
        let wall_time_ms = millis(self.start.elapsed());
        let inner = self.inner.lock().unwrap();
        PipelineTrace {
            sample_id: self.sample_id.to_string(),
            template_version: template_version.into(),
            events: inner.events.clone(),
            total_backend_calls: inner.calls,
            wall_time_ms,
            failure,
        }
    }
}
