//! Single-prompt baselines: direct (io), step-by-step (cot), and a prompt
//! augmented with the three agents' round-1 explanations from a prior run.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{heading, render_context_turns};
use crate::domain::{parse_label, AgentId, Label, Sample};
use crate::trace::PipelineTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    Io,
    Cot,
    ExplanationAugmented,
}

impl BaselineMode {
    pub const ALL: [BaselineMode; 3] = [
        BaselineMode::Io,
        BaselineMode::Cot,
        BaselineMode::ExplanationAugmented,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::Io => "io",
            BaselineMode::Cot => "cot",
            BaselineMode::ExplanationAugmented => "explanation-augmented",
        }
    }
}

impl fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BaselineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "io" => Ok(BaselineMode::Io),
            "cot" => Ok(BaselineMode::Cot),
            "explanation-augmented" | "explain" => Ok(BaselineMode::ExplanationAugmented),
            other => Err(format!(
                "unknown baseline mode {other:?} (io, cot, explanation-augmented)"
            )),
        }
    }
}

/// Round-1 reasoning per sample and agent, harvested from saved traces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Explanations {
    by_sample: HashMap<String, Vec<(AgentId, String)>>,
}

impl Explanations {
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a PipelineTrace>) -> Explanations {
        let mut by_sample = HashMap::new();
        for trace in traces {
            let found: Vec<(AgentId, String)> = AgentId::ALL
                .iter()
                .filter_map(|&a| trace.judgment(a, 1).map(|j| (a, j.reasoning.clone())))
                .collect();
            by_sample.insert(trace.sample_id.clone(), found);
        }
        Explanations { by_sample }
    }

    /// All three agents' explanations, or the first agent that is missing.
    pub fn for_sample(&self, sample_id: &str) -> Result<&[(AgentId, String)], Option<AgentId>> {
        let found = self.by_sample.get(sample_id).ok_or(None)?;
        match AgentId::ALL
            .iter()
            .find(|a| !found.iter().any(|(b, _)| b == *a))
        {
            Some(&missing) => Err(Some(missing)),
            None => Ok(found),
        }
    }

    pub fn len(&self) -> usize {
        self.by_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_sample.is_empty()
    }
}

const ANSWER_FORMAT: &str =
    "End your answer with exactly one line: VERDICT: IRONIC or VERDICT: NOT_IRONIC";

fn text_block(sample: &Sample) -> String {
    let mut out = String::new();
    if !sample.context.is_empty() {
        out.push_str(&render_context_turns(&sample.context));
        out.push_str("\n\n");
    }
    out.push_str(&format!("Text:\n\"\"\"\n{}\n\"\"\"", sample.text));
    out
}

pub fn baseline_prompt(
    mode: BaselineMode,
    sample: &Sample,
    explanations: &[(AgentId, String)],
) -> String {
    let task = "Decide whether the following text is ironic (sarcastic).";
    match mode {
        BaselineMode::Io => format!("{task}\n\n{}\n\n{ANSWER_FORMAT}", text_block(sample)),
        BaselineMode::Cot => format!(
            "{task}\n\n{}\n\nLet's think step by step. Consider the literal meaning, the likely \
intent, and any mismatch between them before answering.\n\n{ANSWER_FORMAT}",
            text_block(sample)
        ),
        BaselineMode::ExplanationAugmented => {
            let blocks: Vec<String> = explanations
                .iter()
                .map(|(a, text)| {
                    format!(
                        "[Explanation from the {} ({})]\n{}",
                        a.display_name(),
                        a.code(),
                        text.trim()
                    )
                })
                .collect();
            format!(
                "{task}\n\n{}\n\nThree analyses of the text are provided below.\n\n{}\n\n{ANSWER_FORMAT}",
                text_block(sample),
                blocks.join("\n\n")
            )
        }
    }
}

/// Last `VERDICT:` line wins.
pub fn parse_verdict(text: &str) -> Option<Label> {
    let payload = text
        .lines()
        .filter_map(heading)
        .rfind(|(name, _)| name == "VERDICT")?
        .1;
    parse_label(payload).ok()
}
