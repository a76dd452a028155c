//! Refinement evaluator: judges the preliminary decision and decides
//! whether one feedback-guided re-analysis round is needed.
//!
//! The model reports a confidence level and whether it sees a strong
//! contradiction; the need for refinement is computed from those two fields
//! here, never taken from the model.

use crate::agents::{heading, render_peer};
use crate::backend::{BackendError, CallRole, ChatBackend, ChatRequest, Message};
use crate::domain::{
    refinement_needed, render_label, AgentId, Confidence, Decision, FeedbackTriplet, Judgment,
    ReEvaluation, Sample, Stage,
};
use crate::trace::{EventKind, TraceRecorder};

/// Feedback used for any component the evaluator left empty.
pub const GENERIC_FEEDBACK: &str =
    "Re-examine your analysis; the panel's reasoning conflicts with the preliminary decision.";

const FORMAT: &str = "Answer with these lines:\n\
CONFIDENCE: HIGH, MEDIUM, or LOW (how likely the preliminary decision is correct)\n\
CONTRADICTION: YES or NO (whether the agents' reasoning strongly contradicts the decision or each other)\n\
If confidence is LOW or there is a contradiction, add one line of concise guidance per agent:\n\
FEEDBACK_CA: what the Context Agent should re-check\n\
FEEDBACK_SA: what the Semantic Agent should re-check\n\
FEEDBACK_RA: what the Rhetoric Agent should re-check";

const REMINDER: &str = "Your previous answer did not follow the required format. Answer again \
with a line CONFIDENCE: HIGH, MEDIUM, or LOW and a line CONTRADICTION: YES or NO.";

const FEEDBACK_REMINDER: &str = "You indicated that the decision needs refinement but gave no \
feedback. Answer again with the lines FEEDBACK_CA:, FEEDBACK_SA:, and FEEDBACK_RA:, each with \
one concise instruction for that agent.";

pub fn evaluation_prompt(sample: &Sample, decision: &Decision, judgments: &[Judgment]) -> String {
    let mut sorted: Vec<&Judgment> = judgments.iter().collect();
    sorted.sort_by_key(|j| j.agent);
    let blocks: Vec<String> = sorted.into_iter().map(render_peer).collect();
    format!(
        "You are the Refinement Evaluator of a panel deciding whether a text is ironic (sarcastic). \
Review the panel's preliminary decision for reliability.\n\n\
Text:\n\"\"\"\n{}\n\"\"\"\n\n\
Preliminary decision: {}\n\
Justification:\n{}\n\n\
Agent assessments:\n\n{}\n\n{FORMAT}",
        sample.text,
        render_label(decision.label),
        decision.justification.trim(),
        blocks.join("\n\n")
    )
}

/// Fields read from one evaluator response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluatorOutput {
    pub confidence: Option<Confidence>,
    pub contradiction: Option<bool>,
    pub feedback: FeedbackTriplet,
}

impl EvaluatorOutput {
    /// Both gating fields present.
    pub fn gating(&self) -> Option<(Confidence, bool)> {
        Some((self.confidence?, self.contradiction?))
    }
}

fn first_word(payload: &str) -> String {
    payload
        .split(|c: char| !c.is_ascii_alphabetic())
        .find(|w| !w.is_empty())
        .unwrap_or("")
        .to_ascii_uppercase()
}

pub fn parse_evaluation(text: &str) -> EvaluatorOutput {
    let mut out = EvaluatorOutput::default();
    for line in text.lines() {
        let Some((name, payload)) = heading(line) else {
            continue;
        };
        match name.as_str() {
            "CONFIDENCE" => {
                out.confidence = match first_word(payload).as_str() {
                    "HIGH" => Some(Confidence::High),
                    "MEDIUM" => Some(Confidence::Medium),
                    "LOW" => Some(Confidence::Low),
                    _ => out.confidence,
                }
            }
            "CONTRADICTION" => {
                out.contradiction = match first_word(payload).as_str() {
                    "YES" | "TRUE" => Some(true),
                    "NO" | "FALSE" => Some(false),
                    _ => out.contradiction,
                }
            }
            "FEEDBACK_CA" => out.feedback.f_ca = payload.trim().to_string(),
            "FEEDBACK_SA" => out.feedback.f_sa = payload.trim().to_string(),
            "FEEDBACK_RA" => out.feedback.f_ra = payload.trim().to_string(),
            _ => {}
        }
    }
    out
}

/// Fills every empty component with [`GENERIC_FEEDBACK`].
pub fn complete_feedback(mut feedback: FeedbackTriplet) -> FeedbackTriplet {
    for agent in AgentId::ALL {
        let slot = match agent {
            AgentId::Context => &mut feedback.f_ca,
            AgentId::Semantic => &mut feedback.f_sa,
            AgentId::Rhetoric => &mut feedback.f_ra,
        };
        if slot.trim().is_empty() {
            *slot = GENERIC_FEEDBACK.to_string();
        }
    }
    feedback
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluated {
    pub evaluation: ReEvaluation,
    /// The evaluator never produced parseable gating fields.
    pub degraded: bool,
    pub backend_calls: u32,
}

pub struct Evaluator<'a> {
    pub backend: &'a dyn ChatBackend,
    pub model: &'a str,
    pub temperature: f64,
}

impl Evaluator<'_> {
    /// Evaluates a preliminary decision with at most two backend calls and
    /// records the result in `trace`.
    pub async fn evaluate(
        &self,
        sample: &Sample,
        decision: &Decision,
        judgments: &[Judgment],
        trace: &TraceRecorder,
    ) -> Result<Evaluated, BackendError> {
        debug_assert_eq!(
            decision.stage,
            Stage::Initial,
            "only preliminary decisions are evaluated"
        );
        let selector = trace.tag(CallRole::Evaluator, None).selector();
        let request = ChatRequest {
            model: self.model.to_string(),
            temperature: self.temperature,
            messages: vec![Message::user(evaluation_prompt(
                sample, decision, judgments,
            ))],
        };
        let first = trace
            .complete(self.backend, &request, CallRole::Evaluator, None)
            .await?;
        let mut calls = 1;
        let mut parsed = parse_evaluation(&first.content);

        let retry = |answer: String, reminder: &str| {
            let mut messages = request.messages.clone();
            messages.push(Message::assistant(answer));
            messages.push(Message::user(reminder));
            ChatRequest {
                messages,
                ..request.clone()
            }
        };

        if parsed.gating().is_none() {
            trace.record(EventKind::ParseFailure {
                selector: selector.clone(),
                detail: "missing CONFIDENCE or CONTRADICTION".into(),
            });
            let second = trace
                .complete(
                    self.backend,
                    &retry(first.content.clone(), REMINDER),
                    CallRole::Evaluator,
                    None,
                )
                .await?;
            calls += 1;
            parsed = parse_evaluation(&second.content);
        } else if let Some((c, contra)) = parsed.gating() {
            if refinement_needed(c, contra) && parsed.feedback.is_empty() {
                let second = trace
                    .complete(
                        self.backend,
                        &retry(first.content.clone(), FEEDBACK_REMINDER),
                        CallRole::Evaluator,
                        None,
                    )
                    .await?;
                calls += 1;
                parsed.feedback = parse_evaluation(&second.content).feedback;
            }
        }

        let (evaluation, degraded) = match parsed.gating() {
            Some((c, contra)) => {
                let feedback =
                    refinement_needed(c, contra).then(|| complete_feedback(parsed.feedback));
                let ev = ReEvaluation::new(c, contra, feedback).expect("feedback matches r_needed");
                (ev, false)
            }
            None => {
                trace.record(EventKind::ParseFailure {
                    selector,
                    detail: "evaluator unparseable after retry; skipping refinement".into(),
                });
                (
                    ReEvaluation::new(Confidence::Medium, false, None).expect("no refinement"),
                    true,
                )
            }
        };
        trace.record(EventKind::Evaluation {
            evaluation: evaluation.clone(),
            backend_calls: calls,
            degraded,
        });
        Ok(Evaluated {
            evaluation,
            degraded,
            backend_calls: calls,
        })
    }
}
