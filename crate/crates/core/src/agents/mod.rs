//! The three analysis agents: prompt construction, response parsing, and
//! the per-round invocation protocol.
//!
//! Each agent answers in one chain-of-thought response whose named sections
//! mirror its analysis steps, ending in a `VERDICT:` line. An unparseable
//! response is retried once with a format reminder and then recorded as an
//! abstention. The Context Agent may ask for a web search in round 1 when
//! search is enabled; the search summary is then fed into a second prompt.

mod parse;
mod prompt;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{search, CallRole, ChatBackend, SearchProvider};
use crate::domain::{AgentId, Judgment, Round, Sample, Verdict};
use crate::error::PipelineError;
use crate::trace::{EventKind, TraceRecorder};

pub(crate) use parse::heading;
pub use parse::{
    parse_output, sections_for, OutputParseError, ParsedAgentOutput, CA_SECTIONS, NO_REASONING,
    RA_SECTIONS, SA_SECTIONS,
};
pub use prompt::{
    render_context_turns, render_peer, render_peers, PromptBuilder, FEEDBACK_HEADING, NO_CONTEXT,
    NO_EXTERNAL_KNOWLEDGE,
};
pub use templates::{PromptTemplate, TemplateSet, PLACEHOLDERS};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptError {
    #[error("no template for {agent} round {round}")]
    MissingTemplate { agent: AgentId, round: u8 },
    #[error(
        "template for {agent} round {round} references unfilled placeholder {{{placeholder}}}"
    )]
    PlaceholderUnfilled {
        agent: AgentId,
        round: u8,
        placeholder: String,
    },
    #[error("template i/o: {0}")]
    TemplateIo(String),
    #[error("invalid round context: {0}")]
    InvalidContext(String),
}

/// What an agent sees besides the sample itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundContext {
    pub round: Round,
    /// The other agents' latest judgments; empty in round 1.
    pub peer_judgments: Vec<Judgment>,
    /// This agent's reviewer feedback, round 3 only.
    pub feedback: Option<String>,
    /// Background knowledge summary (Context Agent).
    pub search_summary: Option<String>,
    /// Offer the `SEARCH:` alternative (Context Agent, round 1).
    pub allow_search: bool,
}

impl RoundContext {
    pub fn independent() -> RoundContext {
        RoundContext {
            round: Round::INDEPENDENT,
            peer_judgments: Vec::new(),
            feedback: None,
            search_summary: None,
            allow_search: false,
        }
    }

    pub fn collaborative(peers: Vec<Judgment>) -> RoundContext {
        RoundContext {
            round: Round::COLLABORATIVE,
            peer_judgments: peers,
            ..RoundContext::independent()
        }
    }

    pub fn refinement(peers: Vec<Judgment>, feedback: impl Into<String>) -> RoundContext {
        RoundContext {
            round: Round::REFINEMENT,
            peer_judgments: peers,
            feedback: Some(feedback.into()),
            ..RoundContext::independent()
        }
    }

    pub fn allowing_search(mut self) -> RoundContext {
        self.allow_search = true;
        self
    }

    pub fn with_search_summary(mut self, summary: Option<String>) -> RoundContext {
        self.search_summary = summary;
        self
    }

    pub fn validate(&self, agent: AgentId) -> Result<(), PromptError> {
        let fail = |msg: String| Err(PromptError::InvalidContext(msg));
        if self.round == Round::INDEPENDENT && !self.peer_judgments.is_empty() {
            return fail("round 1 takes no peer judgments".into());
        }
        if self.feedback.is_some() && self.round != Round::REFINEMENT {
            return fail(format!("feedback supplied in round {}", self.round));
        }
        if self.allow_search && self.round != Round::INDEPENDENT {
            return fail("search is only offered in round 1".into());
        }
        let mut seen = Vec::new();
        for peer in &self.peer_judgments {
            if peer.agent == agent {
                return fail(format!("{agent} listed as its own peer"));
            }
            if seen.contains(&peer.agent) {
                return fail(format!("duplicate peer {}", peer.agent));
            }
            if peer.round >= self.round {
                return fail(format!(
                    "round {} prompt cannot embed a round {} judgment",
                    self.round, peer.round
                ));
            }
            seen.push(peer.agent);
        }
        Ok(())
    }
}

/// Result of one agent invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRun {
    pub judgment: Judgment,
    /// Summary obtained by a search during this run, if any.
    pub search_summary: Option<String>,
    pub backend_calls: u32,
}

/// Shared resources for running agents.
pub struct AgentRunner<'a> {
    pub backend: &'a dyn ChatBackend,
    pub search: &'a dyn SearchProvider,
    pub prompts: &'a PromptBuilder,
    pub search_limit: usize,
}

fn join_raw(parts: &[&str]) -> String {
    parts.join("\n\n---\n\n")
}

impl AgentRunner<'_> {
    /// Runs one agent for one round and records the judgment in `trace`.
    ///
    /// Backend calls: 1 on the happy path, 2 with a format retry, and for a
    /// Context Agent search, 2 prompts plus at most one summary call.
    pub async fn run(
        &self,
        agent: AgentId,
        sample: &Sample,
        ctx: &RoundContext,
        trace: &TraceRecorder,
    ) -> Result<AgentRun, PipelineError> {
        let round = ctx.round;
        let role = CallRole::Agent(agent);
        let selector = trace.tag(role, Some(round.get())).selector();
        let search_ok =
            ctx.allow_search && agent == AgentId::Context && round == Round::INDEPENDENT;

        let request = self.prompts.build(agent, sample, ctx)?;
        let first = trace
            .complete(self.backend, &request, role, Some(round.get()))
            .await?;
        let mut calls = 1;
        let mut search_summary = None;

        let parsed = parse_output(agent, &first.content);
        let (verdict, reasoning, raw) = match parsed {
            Ok(out) if out.search_request.is_none() => (out.verdict, out.reasoning, first.content),
            Ok(out) if search_ok => {
                let query = out.search_request.unwrap_or_default();
                let mut summary = None;
                if !self.search.is_null() {
                    let result = search(
                        self.search,
                        self.backend,
                        trace,
                        &query,
                        self.prompts.model(),
                        self.search_limit,
                    )
                    .await?;
                    if !result.documents.is_empty() {
                        calls += 1;
                    }
                    summary = Some(result.summary).filter(|s| !s.is_empty());
                }
                let followup_ctx = RoundContext {
                    allow_search: false,
                    search_summary: Some(
                        summary
                            .clone()
                            .unwrap_or_else(|| NO_EXTERNAL_KNOWLEDGE.to_string()),
                    ),
                    ..ctx.clone()
                };
                search_summary = summary;
                let followup = self.prompts.build(agent, sample, &followup_ctx)?;
                let second = trace
                    .complete(self.backend, &followup, role, Some(round.get()))
                    .await?;
                calls += 1;
                let raw = join_raw(&[&first.content, &second.content]);
                match parse_output(agent, &second.content) {
                    Ok(out) if out.search_request.is_none() => (out.verdict, out.reasoning, raw),
                    other => {
                        trace.record(EventKind::ParseFailure {
                            selector: selector.clone(),
                            detail: failure_detail(other),
                        });
                        (Verdict::Abstain, String::new(), raw)
                    }
                }
            }
            other => {
                trace.record(EventKind::ParseFailure {
                    selector: selector.clone(),
                    detail: failure_detail(other),
                });
                let retry = self.prompts.reminder(&request, &first.content);
                let second = trace
                    .complete(self.backend, &retry, role, Some(round.get()))
                    .await?;
                calls += 1;
                let raw = join_raw(&[&first.content, &second.content]);
                match parse_output(agent, &second.content) {
                    Ok(out) if out.search_request.is_none() => (out.verdict, out.reasoning, raw),
                    other => {
                        trace.record(EventKind::ParseFailure {
                            selector: selector.clone(),
                            detail: failure_detail(other),
                        });
                        (Verdict::Abstain, String::new(), raw)
                    }
                }
            }
        };

        let judgment = match verdict {
            Verdict::Abstain => Judgment::abstain(agent, round, raw),
            v => Judgment::new(agent, round, v, reasoning, raw)
                .expect("parser always yields reasoning for a verdict"),
        };
        trace.record(EventKind::AgentJudgment {
            judgment: judgment.clone(),
            backend_calls: calls,
        });
        Ok(AgentRun {
            judgment,
            search_summary,
            backend_calls: calls,
        })
    }
}

fn failure_detail(result: Result<ParsedAgentOutput, OutputParseError>) -> String {
    match result {
        Err(e) => e.to_string(),
        Ok(_) => "SEARCH request not allowed here".to_string(),
    }
}
