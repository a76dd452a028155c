use std::collections::BTreeMap;

use super::templates::TemplateSet;
use super::{PromptError, RoundContext};
use crate::backend::{ChatRequest, Message};
use crate::domain::{AgentId, Judgment, Sample, Verdict};

pub const NO_CONTEXT: &str = "(no prior dialogue context)";
pub const FEEDBACK_HEADING: &str = "Reviewer feedback:";
pub const NO_EXTERNAL_KNOWLEDGE: &str =
    "None available. Decide the verdict without external knowledge.";

const FORMAT_FOOTER: &str = "After the sections above, finish with exactly these two parts:\n\
VERDICT: IRONIC or VERDICT: NOT_IRONIC (one line, exactly one of the two tokens)\n\
REASONING: a concise justification of your verdict";

const SEARCH_OPTION: &str = "If you cannot judge the text without external background knowledge, \
you may instead end your answer with a single line\n\
SEARCH: <a short web search query>\n\
and no VERDICT line. You will then receive a summary of the search results.";

const STRICT_REMINDER: &str = "Your previous answer did not follow the required output format. \
Answer again. Your answer must contain a line that reads exactly VERDICT: IRONIC or \
VERDICT: NOT_IRONIC, followed by a line starting with REASONING:.";

pub fn render_context_turns(turns: &[String]) -> String {
    if turns.is_empty() {
        return NO_CONTEXT.to_string();
    }
    let mut out = String::from("Preceding dialogue:");
    for (i, turn) in turns.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", i + 1, turn.trim()));
    }
    out
}

/// `[Semantic Agent (SA), round 1]` followed by verdict and reasoning.
pub fn render_peer(judgment: &Judgment) -> String {
    let reasoning = match judgment.verdict {
        Verdict::Abstain => "(no parseable assessment)",
        _ => judgment.reasoning.trim(),
    };
    format!(
        "[{} ({}), round {}]\nVERDICT: {}\nREASONING: {}",
        judgment.agent.display_name(),
        judgment.agent.code(),
        judgment.round,
        judgment.verdict.render(),
        reasoning
    )
}

pub fn render_peers(peers: &[Judgment]) -> String {
    if peers.is_empty() {
        return String::new();
    }
    let mut sorted: Vec<&Judgment> = peers.iter().collect();
    sorted.sort_by_key(|j| j.agent);
    let blocks: Vec<String> = sorted.into_iter().map(render_peer).collect();
    format!(
        "Assessments from the other agents:\n\n{}",
        blocks.join("\n\n")
    )
}

/// Turns an agent's round context into a chat request.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    templates: TemplateSet,
    model: String,
    temperature: f64,
}

impl PromptBuilder {
    pub fn new(templates: TemplateSet, model: impl Into<String>) -> PromptBuilder {
        PromptBuilder {
            templates,
            model: model.into(),
            temperature: 0.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> PromptBuilder {
        self.temperature = temperature;
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Prompt text for one agent and round.
    pub fn render(
        &self,
        agent: AgentId,
        sample: &Sample,
        ctx: &RoundContext,
    ) -> Result<String, PromptError> {
        ctx.validate(agent)?;
        let template = self.templates.get(agent, ctx.round)?;
        let mut values: BTreeMap<&str, String> = BTreeMap::new();
        values.insert("text", sample.text.clone());
        values.insert("context_turns", render_context_turns(&sample.context));
        values.insert("peer_judgments", render_peers(&ctx.peer_judgments));
        values.insert(
            "feedback",
            ctx.feedback
                .as_deref()
                .map(|f| format!("{FEEDBACK_HEADING}\n{f}"))
                .unwrap_or_default(),
        );
        values.insert(
            "search_summary",
            ctx.search_summary
                .as_deref()
                .map(|s| format!("Background knowledge from an external search:\n{s}"))
                .unwrap_or_default(),
        );
        let mut prompt = template.render(&values)?;
        prompt.push_str("\n\n");
        prompt.push_str(FORMAT_FOOTER);
        if ctx.allow_search && agent == AgentId::Context {
            prompt.push_str("\n\n");
            prompt.push_str(SEARCH_OPTION);
        }
        Ok(prompt)
    }

    pub fn build(
        &self,
        agent: AgentId,
        sample: &Sample,
        ctx: &RoundContext,
    ) -> Result<ChatRequest, PromptError> {
        let prompt = self.render(agent, sample, ctx)?;
        Ok(self.request(vec![Message::user(prompt)]))
    }

    /// The original exchange plus a strict-format reminder.
    pub fn reminder(&self, original: &ChatRequest, answer: &str) -> ChatRequest {
        let mut messages = original.messages.clone();
        messages.push(Message::assistant(answer));
        messages.push(Message::user(STRICT_REMINDER));
        self.request(messages)
    }

    fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            messages,
        }
    }
}
