//! Prompt templates, one plain-text file per (agent, round).
//!
//! Files are named `{ca,sa,ra}_round{1,2,3}.txt`. An optional first line
//! `#version <tag>` sets the template version; otherwise the version is a
//! short content digest. Placeholders are `{name}`; `{{` and `}}` escape braces.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::PromptError;
use crate::domain::{AgentId, Round};

/// Placeholders a template may reference.
pub const PLACEHOLDERS: [&str; 5] = [
    "text",
    "context_turns",
    "peer_judgments",
    "feedback",
    "search_summary",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub agent: AgentId,
    pub round: Round,
    pub text: String,
    pub version: String,
}

impl PromptTemplate {
    pub fn parse(agent: AgentId, round: Round, source: &str) -> PromptTemplate {
        let (version, text) = match source.split_once('\n') {
            Some((first, rest)) if first.starts_with("#version") => (
                first["#version".len()..].trim().to_string(),
                rest.to_string(),
            ),
            _ => {
                let digest = hex::encode(Sha256::digest(source.as_bytes()));
                (format!("sha256:{}", &digest[..12]), source.to_string())
            }
        };
        PromptTemplate {
            agent,
            round,
            text,
            version,
        }
    }

    /// Names of all `{placeholder}` references, in order of first use.
    pub fn placeholders(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for token in scan(&self.text) {
            if let Token::Placeholder(name) = token {
                if !seen.iter().any(|s| s == name) {
                    seen.push(name.to_string());
                }
            }
        }
        seen
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.text.len() + 256);
        for token in scan(&self.text) {
            match token {
                Token::Literal(s) => out.push_str(s),
                Token::Placeholder(name) => match values.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(PromptError::PlaceholderUnfilled {
                            agent: self.agent,
                            round: self.round.get(),
                            placeholder: name.to_string(),
                        })
                    }
                },
            }
        }
        Ok(collapse_blank_lines(&out))
    }
}

enum Token<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn scan(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix("{{") {
            tokens.push(Token::Literal("{"));
            rest = tail;
        } else if let Some(tail) = rest.strip_prefix("}}") {
            tokens.push(Token::Literal("}"));
            rest = tail;
        } else if rest.starts_with('{') {
            let close = rest[1..].find('}').map(|i| i + 1);
            match close {
                Some(end)
                    if end > 1
                        && rest[1..end]
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '_') =>
                {
                    tokens.push(Token::Placeholder(&rest[1..end]));
                    rest = &rest[end + 1..];
                }
                _ => {
                    tokens.push(Token::Literal("{"));
                    rest = &rest[1..];
                }
            }
        } else {
            let next = rest
                .char_indices()
                .skip(1)
                .find(|&(_, c)| c == '{' || c == '}')
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            let (lit, tail) = rest.split_at(next);
            // A lone '}' that is not part of '}}' passes through.
            tokens.push(Token::Literal(lit));
            rest = tail;
        }
    }
    tokens
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.trim().lines() {
        if line.trim().is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
            out.push('\n');
        } else {
            blank_run = 0;
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    out.trim_end().to_string()
}

fn file_name(agent: AgentId, round: Round) -> String {
    format!(
        "{}_round{}.txt",
        agent.code().to_ascii_lowercase(),
        round.get()
    )
}

const BUILTIN: [(AgentId, u8, &str); 9] = [
    (
        AgentId::Context,
        1,
        include_str!("../../templates/ca_round1.txt"),
    ),
    (
        AgentId::Context,
        2,
        include_str!("../../templates/ca_round2.txt"),
    ),
    (
        AgentId::Context,
        3,
        include_str!("../../templates/ca_round3.txt"),
    ),
    (
        AgentId::Semantic,
        1,
        include_str!("../../templates/sa_round1.txt"),
    ),
    (
        AgentId::Semantic,
        2,
        include_str!("../../templates/sa_round2.txt"),
    ),
    (
        AgentId::Semantic,
        3,
        include_str!("../../templates/sa_round3.txt"),
    ),
    (
        AgentId::Rhetoric,
        1,
        include_str!("../../templates/ra_round1.txt"),
    ),
    (
        AgentId::Rhetoric,
        2,
        include_str!("../../templates/ra_round2.txt"),
    ),
    (
        AgentId::Rhetoric,
        3,
        include_str!("../../templates/ra_round3.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<(AgentId, Round), PromptTemplate>,
}

impl TemplateSet {
    /// The templates compiled into the crate.
    pub fn builtin() -> TemplateSet {
        let templates = BUILTIN
            .iter()
            .map(|&(agent, round, src)| {
                let round = Round::new(round).expect("builtin rounds are valid");
                ((agent, round), PromptTemplate::parse(agent, round, src))
            })
            .collect();
        TemplateSet { templates }
    }

    /// Loads every `{agent}_round{n}.txt` present in `dir`. Missing files
    /// surface as `MissingTemplate` when a prompt for them is built.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<TemplateSet, PromptError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(PromptError::TemplateIo(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let mut templates = BTreeMap::new();
        for agent in AgentId::ALL {
            for n in 1..=3 {
                let round = Round::new(n).unwrap();
                let path = dir.join(file_name(agent, round));
                if path.exists() {
                    let src = std::fs::read_to_string(&path)
                        .map_err(|e| PromptError::TemplateIo(format!("{}: {e}", path.display())))?;
                    templates.insert((agent, round), PromptTemplate::parse(agent, round, &src));
                }
            }
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, agent: AgentId, round: Round) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(&(agent, round))
            .ok_or(PromptError::MissingTemplate {
                agent,
                round: round.get(),
            })
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates
            .insert((template.agent, template.round), template);
    }

    /// Combined version tag stamped into traces.
    pub fn version(&self) -> String {
        let versions: BTreeSet<&str> = self
            .templates
            .values()
            .map(|t| t.version.as_str())
            .collect();
        versions.into_iter().collect::<Vec<_>>().join("+")
    }

    /// Checks that templates exist for every (agent, round) pair the
    /// pipeline may use and that they reference only known placeholders.
    pub fn validate(&self, agents: &[AgentId]) -> Result<(), PromptError> {
        for &agent in agents {
            for n in 1..=3 {
                let template = self.get(agent, Round::new(n).unwrap())?;
                for name in template.placeholders() {
                    if !PLACEHOLDERS.contains(&name.as_str()) {
                        return Err(PromptError::PlaceholderUnfilled {
                            agent,
                            round: n,
                            placeholder: name,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
