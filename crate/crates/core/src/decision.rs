//! Aggregation of a round's judgments into a [`Decision`].
//!
//! Unanimity among the non-abstaining verdicts gives consensus, a strict
//! majority gives a majority decision, and anything else (a tie, or no
//! usable verdicts) goes to an arbitration call that weighs the agents'
//! reasoning. With three binary votes the arbitration branch is only reached
//! through abstentions or two-agent ablations.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::agents::{heading, render_peer};
use crate::backend::{BackendError, CallRole, ChatBackend, ChatRequest, Message};
use crate::domain::{
    parse_label, render_label, AgentId, Decision, Judgment, Label, Method, Round, Sample, Stage,
    Verdict,
};
use crate::trace::{EventKind, TraceRecorder};

/// Justification used when every agent abstained and arbitration failed.
pub const ALL_ABSTAIN_JUSTIFICATION: &str =
    "All agents abstained and arbitration produced no usable verdict; defaulting to NOT_IRONIC.";

/// Priority used when arbitration output cannot be parsed.
pub const FALLBACK_PRIORITY: [AgentId; 3] =
    [AgentId::Context, AgentId::Semantic, AgentId::Rhetoric];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregationError {
    #[error("no judgments to aggregate")]
    Empty,
    #[error("judgments come from different rounds")]
    MixedRounds,
    #[error("more than one judgment from {0}")]
    DuplicateAgent(AgentId),
}

/// One judgment per enabled agent, all from the same round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationInput {
    judgments: Vec<Judgment>,
    pub allow_arbitration: bool,
}

impl AggregationInput {
    pub fn new(
        judgments: Vec<Judgment>,
        allow_arbitration: bool,
    ) -> Result<Self, AggregationError> {
        let first = judgments.first().ok_or(AggregationError::Empty)?;
        let round = first.round;
        let mut seen = BTreeSet::new();
        for j in &judgments {
            if j.round != round {
                return Err(AggregationError::MixedRounds);
            }
            if !seen.insert(j.agent) {
                return Err(AggregationError::DuplicateAgent(j.agent));
            }
        }
        let mut judgments = judgments;
        judgments.sort_by_key(|j| j.agent);
        Ok(AggregationInput {
            judgments,
            allow_arbitration,
        })
    }

    /// Judgments in agent order.
    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn round(&self) -> Round {
        self.judgments[0].round
    }
}

/// Outcome of counting the non-abstaining votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tally {
    Unanimous(Label),
    Majority(Label),
    Undecided,
}

pub fn tally(judgments: &[Judgment]) -> Tally {
    let votes: Vec<Label> = judgments.iter().filter_map(|j| j.verdict.label()).collect();
    if votes.is_empty() {
        return Tally::Undecided;
    }
    let ironic = votes.iter().filter(|&&l| l == Label::Ironic).count();
    let non = votes.len() - ironic;
    if non == 0 {
        Tally::Unanimous(Label::Ironic)
    } else if ironic == 0 {
        Tally::Unanimous(Label::NonIronic)
    } else if 2 * ironic > votes.len() {
        Tally::Majority(Label::Ironic)
    } else if 2 * non > votes.len() {
        Tally::Majority(Label::NonIronic)
    } else {
        Tally::Undecided
    }
}

/// Reasoning of every judgment agreeing with `label`, in agent order, each
/// prefixed by the agent's name. An arbiter rationale goes first.
pub fn synthesize_justification(
    label: Label,
    judgments: &[Judgment],
    arbiter: Option<&str>,
) -> String {
    let mut sorted: Vec<&Judgment> = judgments.iter().collect();
    sorted.sort_by_key(|j| j.agent);
    let mut parts = Vec::new();
    if let Some(r) = arbiter.map(str::trim).filter(|r| !r.is_empty()) {
        parts.push(format!("Decision Agent: {r}"));
    }
    for j in sorted {
        if j.verdict == Verdict::from(label) {
            parts.push(format!(
                "{}: {}",
                j.agent.display_name(),
                j.reasoning.trim()
            ));
        }
    }
    if parts.is_empty() {
        if judgments.iter().all(|j| j.verdict == Verdict::Abstain) {
            return ALL_ABSTAIN_JUSTIFICATION.to_string();
        }
        return format!(
            "The panel was resolved to {} without a stated rationale.",
            render_label(label)
        );
    }
    parts.join("\n\n")
}

/// The CA > SA > RA priority choice among non-abstaining judgments.
pub fn fallback_label(judgments: &[Judgment]) -> Option<Label> {
    FALLBACK_PRIORITY.iter().find_map(|a| {
        judgments
            .iter()
            .find(|j| j.agent == *a)
            .and_then(|j| j.verdict.label())
    })
}

const ARBITER_FORMAT: &str = "Finish with exactly these two lines:\n\
RATIONALE: one or two sentences naming the most convincing argument and why\n\
VERDICT: IRONIC or VERDICT: NOT_IRONIC";

const ARBITER_REMINDER: &str = "Your previous answer did not follow the required format. \
Answer again, ending with a line RATIONALE: ... followed by a line that reads exactly \
VERDICT: IRONIC or VERDICT: NOT_IRONIC.";

pub fn arbitration_prompt(sample: &Sample, judgments: &[Judgment]) -> String {
    let blocks: Vec<String> = judgments.iter().map(render_peer).collect();
    format!(
        "You are the Decision Agent of a panel deciding whether a text is ironic (sarcastic). \
The analysis agents could not reach a majority.\n\n\
Text:\n\"\"\"\n{}\n\"\"\"\n\n\
Agent assessments:\n\n{}\n\n\
Compare the agents' arguments and decide which one is the most clear, coherent, and relevant \
to the text. Adopt the verdict that argument supports.\n\n{ARBITER_FORMAT}",
        sample.text,
        blocks.join("\n\n")
    )
}

/// Parsed arbiter answer: the last VERDICT line and any RATIONALE text.
pub fn parse_arbitration(text: &str) -> Option<(Label, Option<String>)> {
    let mut verdict = None;
    let mut rationale = None;
    for line in text.lines() {
        if let Some((name, payload)) = heading(line) {
            match name.as_str() {
                "VERDICT" => verdict = Some(payload.to_string()),
                "RATIONALE" if !payload.is_empty() => rationale = Some(payload.to_string()),
                _ => {}
            }
        }
    }
    let label = parse_label(&verdict?).ok()?;
    Some((label, rationale))
}

fn justification_prompt(sample: &Sample, label: Label, judgments: &[Judgment]) -> String {
    let blocks: Vec<String> = judgments.iter().map(render_peer).collect();
    format!(
        "A panel of agents classified the text below as {}.\n\n\
Text:\n\"\"\"\n{}\n\"\"\"\n\n\
Agent assessments:\n\n{}\n\n\
Write a concise justification (at most four sentences) for the panel's decision, \
drawing only on the agents' reasoning.",
        render_label(label),
        sample.text,
        blocks.join("\n\n")
    )
}

/// Decision layer: pure voting plus the optional model calls.
pub struct DecisionMaker<'a> {
    pub backend: &'a dyn ChatBackend,
    pub model: &'a str,
    pub temperature: f64,
    /// Replace the concatenated justification with one model-written summary.
    pub llm_justification: bool,
}

impl DecisionMaker<'_> {
    fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model: self.model.to_string(),
            temperature: self.temperature,
            messages,
        }
    }

    /// Aggregates a round's judgments and records the decision in `trace`.
    /// Only the arbitration and justification calls touch the backend.
    pub async fn aggregate(
        &self,
        input: &AggregationInput,
        sample: &Sample,
        trace: &TraceRecorder,
    ) -> Result<Decision, BackendError> {
        let judgments = input.judgments();
        let round = input.round();
        let stage = if round == Round::REFINEMENT {
            Stage::Refined
        } else {
            Stage::Initial
        };
        let mut calls = 0u32;

        let (label, method, rationale) = match tally(judgments) {
            Tally::Unanimous(l) => (l, Method::Consensus, None),
            Tally::Majority(l) => (l, Method::Majority, None),
            Tally::Undecided => {
                let mut ruled = None;
                if input.allow_arbitration {
                    let request =
                        self.request(vec![Message::user(arbitration_prompt(sample, judgments))]);
                    let first = trace
                        .complete(self.backend, &request, CallRole::Arbiter, Some(round.get()))
                        .await?;
                    calls += 1;
                    ruled = parse_arbitration(&first.content);
                    if ruled.is_none() {
                        trace.record(EventKind::ParseFailure {
                            selector: trace.tag(CallRole::Arbiter, Some(round.get())).selector(),
                            detail: "arbitration output has no VERDICT line".into(),
                        });
                        let mut messages = request.messages.clone();
                        messages.push(Message::assistant(first.content));
                        messages.push(Message::user(ARBITER_REMINDER));
                        let second = trace
                            .complete(
                                self.backend,
                                &self.request(messages),
                                CallRole::Arbiter,
                                Some(round.get()),
                            )
                            .await?;
                        calls += 1;
                        ruled = parse_arbitration(&second.content);
                        if ruled.is_none() {
                            trace.record(EventKind::ParseFailure {
                                selector: trace
                                    .tag(CallRole::Arbiter, Some(round.get()))
                                    .selector(),
                                detail: "arbitration retry unparseable; using priority fallback"
                                    .into(),
                            });
                        }
                    }
                }
                match ruled {
                    Some((l, r)) => (l, Method::Arbitration, r),
                    None => (
                        fallback_label(judgments).unwrap_or(Label::NonIronic),
                        Method::Arbitration,
                        None,
                    ),
                }
            }
        };

        let mut justification = synthesize_justification(label, judgments, rationale.as_deref());
        if self.llm_justification {
            let request = self.request(vec![Message::user(justification_prompt(
                sample, label, judgments,
            ))]);
            let resp = trace
                .complete(
                    self.backend,
                    &request,
                    CallRole::Justifier,
                    Some(round.get()),
                )
                .await?;
            calls += 1;
            if !resp.content.trim().is_empty() {
                justification = resp.content.trim().to_string();
            }
        }

        let decision = Decision {
            label,
            justification,
            method,
            stage,
        };
        trace.record(EventKind::Decision {
            decision: decision.clone(),
            backend_calls: calls,
        });
        Ok(decision)
    }
}
