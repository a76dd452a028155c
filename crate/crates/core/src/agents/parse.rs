//! Line-oriented grammar for agent responses.
//!
//! A conformant response is a sequence of `HEADING: text` blocks. The
//! agent's analysis sections come first, followed by a `VERDICT:` line and a
//! `REASONING:` block. The Context Agent may end with `SEARCH: <query>` in
//! place of a verdict. Headings may carry markdown decoration (`**VERDICT:**`,
//! `### THEME:`); prose outside any heading is ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{parse_label, AgentId, LabelParseError, Verdict};

pub const CA_SECTIONS: [&str; 4] = ["ENTITIES", "RELATIONS", "THEME", "CONTEXT_CONSISTENCY"];
pub const SA_SECTIONS: [&str; 5] = [
    "LITERAL_MEANING",
    "IMPLIED_INTENT",
    "EXPRESSED_EMOTION",
    "EXPECTED_EMOTION",
    "COMMONSENSE_CHECK",
];
pub const RA_SECTIONS: [&str; 3] = [
    "RHETORICAL_DEVICES",
    "DEVICE_FUNCTIONS",
    "RHETORICAL_STRUCTURE",
];

/// Reasoning stored when a response has a verdict but nothing else.
pub const NO_REASONING: &str = "(no reasoning given)";

/// Chain-of-thought section headings for an agent, in prompt order.
pub fn sections_for(agent: AgentId) -> &'static [&'static str] {
    match agent {
        AgentId::Context => &CA_SECTIONS,
        AgentId::Semantic => &SA_SECTIONS,
        AgentId::Rhetoric => &RA_SECTIONS,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAgentOutput {
    /// `Abstain` when the response asked for a search instead.
    pub verdict: Verdict,
    pub reasoning: String,
    pub sections: BTreeMap<String, String>,
    pub search_request: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutputParseError {
    #[error("no VERDICT line found")]
    MissingVerdict,
    #[error("VERDICT payload not a label: {0}")]
    BadVerdict(#[from] LabelParseError),
    #[error("SEARCH line has an empty query")]
    EmptySearch,
}

/// Splits `line` into `(HEADING, payload)` when it starts with a heading
/// token followed by a colon.
pub(crate) fn heading(line: &str) -> Option<(String, &str)> {
    let stripped =
        line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '#' | '*' | '-' | '>'));
    let colon = stripped.find(':')?;
    let name = stripped[..colon].trim_end_matches(['*', ' ']);
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphabetic() || c == '_' || c == ' ')
    {
        return None;
    }
    let name = name.trim().to_ascii_uppercase().replace(' ', "_");
    let payload = stripped[colon + 1..]
        .trim_start_matches(['*', ' ', '\t'])
        .trim_end();
    Some((name, payload))
}

enum Final<'a> {
    Verdict(&'a str),
    Search(&'a str),
}

pub fn parse_output(agent: AgentId, text: &str) -> Result<ParsedAgentOutput, OutputParseError> {
    let known = sections_for(agent);
    let mut sections: BTreeMap<String, String> = BTreeMap::new();
    let mut reasoning: Option<String> = None;
    let mut last: Option<Final<'_>> = None;
    // Which block subsequent untagged lines belong to.
    let mut open: Option<String> = None;

    for line in text.lines() {
        if let Some((name, payload)) = heading(line) {
            match name.as_str() {
                "VERDICT" => {
                    last = Some(Final::Verdict(payload));
                    open = None;
                    continue;
                }
                "SEARCH" if agent == AgentId::Context => {
                    last = Some(Final::Search(payload));
                    open = None;
                    continue;
                }
                "REASONING" => {
                    reasoning = Some(payload.to_string());
                    open = Some(name);
                    continue;
                }
                n if known.contains(&n) => {
                    sections.insert(name.clone(), payload.to_string());
                    open = Some(name);
                    continue;
                }
                _ => {}
            }
        }
        let Some(block) = &open else { continue };
        let target = if block == "REASONING" {
            reasoning.get_or_insert_with(String::new)
        } else {
            sections.entry(block.clone()).or_default()
        };
        if !target.is_empty() {
            target.push('\n');
        }
        target.push_str(line.trim_end());
    }

    for value in sections.values_mut() {
        *value = value.trim().to_string();
    }
    sections.retain(|_, v| !v.is_empty());

    let (verdict, search_request) = match last {
        None => return Err(OutputParseError::MissingVerdict),
        Some(Final::Verdict(payload)) => (Verdict::from(parse_label(payload)?), None),
        Some(Final::Search(query)) => {
            let query = query.trim().trim_matches('"').trim();
            if query.is_empty() {
                return Err(OutputParseError::EmptySearch);
            }
            (Verdict::Abstain, Some(query.to_string()))
        }
    };

    let reasoning = reasoning
        .map(|r| r.trim().to_string())
        .filter(|r| !r.is_empty())
        .unwrap_or_else(|| {
            let joined = known
                .iter()
                .filter_map(|k| sections.get(*k).map(|v| format!("{k}: {v}")))
                .collect::<Vec<_>>()
                .join("\n");
            if joined.is_empty() {
                NO_REASONING.to_string()
            } else {
                joined
            }
        });

    Ok(ParsedAgentOutput {
        verdict,
        reasoning,
        sections,
        search_request,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Label;
    use proptest::prelude::*;

    #[test]
    fn verdict_and_reasoning() {
        let out = parse_output(
            AgentId::Semantic,
            "LITERAL_MEANING: praise\nsecond line\nVERDICT: IRONIC\nREASONING: hyperbole contradicts context",
        )
        .unwrap();
        assert_eq!(out.verdict, Verdict::Ironic);
        assert_eq!(out.reasoning, "hyperbole contradicts context");
        assert_eq!(out.sections["LITERAL_MEANING"], "praise\nsecond line");
        assert_eq!(out.search_request, None);
    }

    #[test]
    fn search_line_from_context_agent() {
        let out = parse_output(
            AgentId::Context,
            "ENTITIES: Congress\nSEARCH: 2018 tax bill outcome",
        )
        .unwrap();
        assert_eq!(out.search_request.as_deref(), Some("2018 tax bill outcome"));
        assert_eq!(out.verdict, Verdict::Abstain);
        // Other agents do not get the search grammar.
        assert_eq!(
            parse_output(AgentId::Rhetoric, "SEARCH: anything"),
            Err(OutputParseError::MissingVerdict)
        );
    }

    #[test]
    fn prose_without_verdict_fails() {
        assert_eq!(
            parse_output(AgentId::Semantic, "I think it's sarcastic."),
            Err(OutputParseError::MissingVerdict)
        );
        assert!(matches!(
            parse_output(AgentId::Semantic, "VERDICT: maybe"),
            Err(OutputParseError::BadVerdict(_))
        ));
    }

    #[test]
    fn last_verdict_wins_and_markdown_is_tolerated() {
        let text = "Draft: VERDICT: IRONIC\n**VERDICT:** IRONIC\nOn reflection...\n### Verdict: NOT_IRONIC\n**REASONING:** plain statement";
        let out = parse_output(AgentId::Rhetoric, text).unwrap();
        assert_eq!(out.verdict, Verdict::NonIronic);
        assert_eq!(out.reasoning, "plain statement");
    }

    #[test]
    fn reasoning_falls_back_to_sections() {
        let out = parse_output(
            AgentId::Rhetoric,
            "RHETORICAL_DEVICES: hyperbole\nVERDICT: IRONIC",
        )
        .unwrap();
        assert_eq!(out.reasoning, "RHETORICAL_DEVICES: hyperbole");
        let bare = parse_output(AgentId::Rhetoric, "VERDICT: NOT_IRONIC").unwrap();
        assert_eq!(bare.reasoning, NO_REASONING);
    }

    fn conformant(agent: AgentId) -> impl Strategy<Value = (String, Label, Vec<String>)> {
        let n = sections_for(agent).len();
        (
            prop::collection::vec("[a-zA-Z0-9 ,.'!?]{1,60}", n),
            any::<bool>(),
            "[a-zA-Z0-9 ,.'!?]{1,80}",
            any::<bool>(),
        )
            .prop_map(move |(bodies, ironic, reason, bold)| {
                let label = if ironic {
                    Label::Ironic
                } else {
                    Label::NonIronic
                };
                let mut text = String::from("Let me analyze the text.\n");
                for (h, b) in sections_for(agent).iter().zip(&bodies) {
                    text.push_str(&format!("{h}: {b}\n"));
                }
                let verdict = crate::domain::render_label(label);
                if bold {
                    text.push_str(&format!(
                        "**VERDICT:** {verdict}\n**REASONING:** x{reason}\n"
                    ));
                } else {
                    text.push_str(&format!("VERDICT: {verdict}\nREASONING: x{reason}\n"));
                }
                (text, label, bodies)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn conformant_ca_outputs_parse((text, label, _) in conformant(AgentId::Context)) {
            let out = parse_output(AgentId::Context, &text).unwrap();
            prop_assert_eq!(out.verdict, Verdict::from(label));
            prop_assert!(out.reasoning.starts_with('x'));
        }

        #[test]
        fn conformant_ra_outputs_parse((text, label, _) in conformant(AgentId::Rhetoric)) {
            let out = parse_output(AgentId::Rhetoric, &text).unwrap();
            prop_assert_eq!(out.verdict, Verdict::from(label));
            prop_assert!(out.reasoning.starts_with('x'));
        }

        #[test]
        fn sections_are_recovered((text, label, bodies) in conformant(AgentId::Semantic)) {
            let out = parse_output(AgentId::Semantic, &text).unwrap();
            prop_assert_eq!(out.verdict, Verdict::from(label));
            for (h, b) in SA_SECTIONS.iter().zip(&bodies) {
                let trimmed = b.trim();
                if trimmed.is_empty() {
                    prop_assert!(!out.sections.contains_key(*h));
                } else {
                    prop_assert_eq!(out.sections[*h].as_str(), trimmed);
                }
            }
        }

        #[test]
        fn stripping_verdict_line_fails((text, _, _) in conformant(AgentId::Rhetoric)) {
            let stripped: String = text
                .lines()
                .filter(|l| !l.contains("VERDICT"))
                .collect::<Vec<_>>()
                .join("\n");
            prop_assert_eq!(parse_output(AgentId::Rhetoric, &stripped), Err(OutputParseError::MissingVerdict));
        }
    }
}
