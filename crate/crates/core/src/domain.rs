//! Domain types and label algebra shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary irony label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Ironic,
    NonIronic,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Ironic, Label::NonIronic];

    pub fn flipped(self) -> Label {
        match self {
            Label::Ironic => Label::NonIronic,
            Label::NonIronic => Label::Ironic,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(render_label(*self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognized label token: {text:?}")]
pub struct LabelParseError {
    pub text: String,
}

// Longest first so that a negated token never matches as its positive suffix.
const LABEL_TOKENS: [(&str, Label); 5] = [
    ("NOT_SARCASTIC", Label::NonIronic),
    ("NOT_IRONIC", Label::NonIronic),
    ("NON-IRONIC", Label::NonIronic),
    ("SARCASTIC", Label::Ironic),
    ("IRONIC", Label::Ironic),
];

/// Parses a canonical label token, case-insensitively.
///
/// Leading markdown emphasis or quotes are ignored, and the token may be
/// followed by punctuation or further prose (`"IRONIC - the hyperbole..."`),
/// but it must end on a word boundary: `IRONICALLY` is rejected.
pub fn parse_label(text: &str) -> Result<Label, LabelParseError> {
    let trimmed = text
        .trim_start_matches(|c: char| {
            c.is_whitespace() || matches!(c, '*' | '"' | '\'' | '`' | '[' | '(')
        })
        .to_ascii_uppercase();
    for (token, label) in LABEL_TOKENS {
        if let Some(rest) = trimmed.strip_prefix(token) {
            let boundary = rest
                .chars()
                .next()
                .is_none_or(|c| !(c.is_alphanumeric() || c == '_' || c == '-'));
            if boundary {
                return Ok(label);
            }
        }
    }
    Err(LabelParseError {
        text: text.to_string(),
    })
}

pub fn render_label(label: Label) -> &'static str {
    match label {
        Label::Ironic => "IRONIC",
        Label::NonIronic => "NOT_IRONIC",
    }
}

/// One of the three analysis agents. Ordering is CA < SA < RA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentId {
    #[serde(rename = "CA")]
    Context,
    #[serde(rename = "SA")]
    Semantic,
    #[serde(rename = "RA")]
    Rhetoric,
}

impl AgentId {
    pub const ALL: [AgentId; 3] = [AgentId::Context, AgentId::Semantic, AgentId::Rhetoric];

    pub fn code(self) -> &'static str {
        match self {
            AgentId::Context => "CA",
            AgentId::Semantic => "SA",
            AgentId::Rhetoric => "RA",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AgentId::Context => "Context Agent",
            AgentId::Semantic => "Semantic Agent",
            AgentId::Rhetoric => "Rhetoric Agent",
        }
    }

    pub fn from_code(code: &str) -> Option<AgentId> {
        match code.trim().to_ascii_uppercase().as_str() {
            "CA" | "CONTEXT" => Some(AgentId::Context),
            "SA" | "SEMANTIC" => Some(AgentId::Semantic),
            "RA" | "RHETORIC" => Some(AgentId::Rhetoric),
            _ => None,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Analysis round: 1 independent, 2 collaborative, 3 feedback-guided refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Round(u8);

impl Round {
    pub const INDEPENDENT: Round = Round(1);
    pub const COLLABORATIVE: Round = Round(2);
    pub const REFINEMENT: Round = Round(3);

    pub fn new(n: u8) -> Result<Round, DomainError> {
        if (1..=3).contains(&n) {
            Ok(Round(n))
        } else {
            Err(DomainError::InvalidRound(n))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Round {
    type Error = DomainError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Round::new(n)
    }
}

impl From<Round> for u8 {
    fn from(r: Round) -> u8 {
        r.0
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("round must be 1, 2 or 3, got {0}")]
    InvalidRound(u8),
    #[error("sample text is empty")]
    EmptyText,
    #[error("judgment with a verdict must carry non-empty reasoning")]
    MissingReasoning,
    #[error("feedback must be present exactly when refinement is needed")]
    FeedbackMismatch,
    #[error("refinement requested but every feedback component is empty")]
    EmptyFeedback,
}

/// One input text, with optional dialogue context and gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SampleRepr")]
pub struct Sample {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Label>,
}

#[derive(Deserialize)]
struct SampleRepr {
    id: String,
    text: String,
    #[serde(default)]
    context: Vec<String>,
    #[serde(default)]
    gold: Option<Label>,
}

impl TryFrom<SampleRepr> for Sample {
    type Error = DomainError;

    fn try_from(r: SampleRepr) -> Result<Self, Self::Error> {
        Sample::new(r.id, r.text, r.context, r.gold)
    }
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        context: Vec<String>,
        gold: Option<Label>,
    ) -> Result<Sample, DomainError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DomainError::EmptyText);
        }
        Ok(Sample {
            id: id.into(),
            text,
            context,
            gold,
        })
    }
}

/// An agent's verdict; `Abstain` marks output that never parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ironic,
    NonIronic,
    Abstain,
}

impl Verdict {
    pub fn label(self) -> Option<Label> {
        match self {
            Verdict::Ironic => Some(Label::Ironic),
            Verdict::NonIronic => Some(Label::NonIronic),
            Verdict::Abstain => None,
        }
    }

    pub fn render(self) -> &'static str {
        match self {
            Verdict::Ironic => "IRONIC",
            Verdict::NonIronic => "NOT_IRONIC",
            Verdict::Abstain => "ABSTAIN",
        }
    }
}

impl From<Label> for Verdict {
    fn from(label: Label) -> Verdict {
        match label {
            Label::Ironic => Verdict::Ironic,
            Label::NonIronic => Verdict::NonIronic,
        }
    }
}

/// One agent's output for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JudgmentRepr")]
pub struct Judgment {
    pub agent: AgentId,
    pub round: Round,
    pub verdict: Verdict,
    pub reasoning: String,
    pub raw: String,
}

#[derive(Deserialize)]
struct JudgmentRepr {
    agent: AgentId,
    round: Round,
    verdict: Verdict,
    reasoning: String,
    raw: String,
}

impl TryFrom<JudgmentRepr> for Judgment {
    type Error = DomainError;

    fn try_from(r: JudgmentRepr) -> Result<Self, Self::Error> {
        Judgment::new(r.agent, r.round, r.verdict, r.reasoning, r.raw)
    }
}

impl Judgment {
    pub fn new(
        agent: AgentId,
        round: Round,
        verdict: Verdict,
        reasoning: impl Into<String>,
        raw: impl Into<String>,
    ) -> Result<Judgment, DomainError> {
        let reasoning = reasoning.into();
        if verdict != Verdict::Abstain && reasoning.trim().is_empty() {
            return Err(DomainError::MissingReasoning);
        }
        Ok(Judgment {
            agent,
            round,
            verdict,
            reasoning,
            raw: raw.into(),
        })
    }

    pub fn abstain(agent: AgentId, round: Round, raw: impl Into<String>) -> Judgment {
        Judgment {
            agent,
            round,
            verdict: Verdict::Abstain,
            reasoning: String::new(),
            raw: raw.into(),
        }
    }
}

/// Per-agent textual guidance for the refinement round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackTriplet {
    pub f_ca: String,
    pub f_sa: String,
    pub f_ra: String,
}

impl FeedbackTriplet {
    pub fn for_agent(&self, agent: AgentId) -> &str {
        match agent {
            AgentId::Context => &self.f_ca,
            AgentId::Semantic => &self.f_sa,
            AgentId::Rhetoric => &self.f_ra,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.f_ca.trim().is_empty() && self.f_sa.trim().is_empty() && self.f_ra.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::High, Confidence::Medium, Confidence::Low];
}

/// Whether a refinement pass is required: low confidence or a strong
/// contradiction. Medium confidence alone does not trigger.
pub fn refinement_needed(confidence: Confidence, contradiction: bool) -> bool {
    confidence == Confidence::Low || contradiction
}

/// Evaluator verdict on a preliminary decision.
///
/// `r_needed` is always derived from `confidence` and `contradiction`; it
/// cannot be set independently, including through deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ReEvaluationRepr")]
pub struct ReEvaluation {
    confidence: Confidence,
    contradiction: bool,
    r_needed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    feedback: Option<FeedbackTriplet>,
}

#[derive(Deserialize)]
struct ReEvaluationRepr {
    confidence: Confidence,
    contradiction: bool,
    r_needed: bool,
    #[serde(default)]
    feedback: Option<FeedbackTriplet>,
}

impl TryFrom<ReEvaluationRepr> for ReEvaluation {
    type Error = DomainError;

    fn try_from(r: ReEvaluationRepr) -> Result<Self, Self::Error> {
        let ev = ReEvaluation::new(r.confidence, r.contradiction, r.feedback)?;
        if ev.r_needed != r.r_needed {
            return Err(DomainError::FeedbackMismatch);
        }
        Ok(ev)
    }
}

impl ReEvaluation {
    pub fn new(
        confidence: Confidence,
        contradiction: bool,
        feedback: Option<FeedbackTriplet>,
    ) -> Result<ReEvaluation, DomainError> {
        let r_needed = refinement_needed(confidence, contradiction);
        match (&feedback, r_needed) {
            (Some(f), true) if f.is_empty() => return Err(DomainError::EmptyFeedback),
            (Some(_), true) | (None, false) => {}
            _ => return Err(DomainError::FeedbackMismatch),
        }
        Ok(ReEvaluation {
            confidence,
            contradiction,
            r_needed,
            feedback,
        })
    }

    pub fn confidence(&self) -> Confidence {
        self.confidence
    }

    pub fn contradiction(&self) -> bool {
        self.contradiction
    }

    pub fn r_needed(&self) -> bool {
        self.r_needed
    }

    pub fn feedback(&self) -> Option<&FeedbackTriplet> {
        self.feedback.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Consensus,
    Majority,
    Arbitration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Refined,
}

/// Classification produced by the decision layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Label,
    pub justification: String,
    pub method: Method,
    pub stage: Stage,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_tokens_parse() {
        assert_eq!(parse_label("IRONIC"), Ok(Label::Ironic));
        assert_eq!(parse_label("not_ironic"), Ok(Label::NonIronic));
        assert_eq!(parse_label("Sarcastic"), Ok(Label::Ironic));
        assert_eq!(parse_label("NOT_SARCASTIC"), Ok(Label::NonIronic));
        assert_eq!(parse_label("non-ironic"), Ok(Label::NonIronic));
        assert_eq!(parse_label("  **IRONIC** "), Ok(Label::Ironic));
        assert_eq!(parse_label("IRONIC - hyperbole"), Ok(Label::Ironic));
    }

    #[test]
    fn unknown_tokens_fail_with_text() {
        let err = parse_label("maybe").unwrap_err();
        assert_eq!(err.text, "maybe");
        assert!(parse_label("IRONICALLY").is_err());
        assert!(parse_label("").is_err());
        assert!(parse_label("NOT").is_err());
    }

    #[test]
    fn render_round_trips() {
        assert_eq!(render_label(Label::Ironic), "IRONIC");
        assert_eq!(render_label(Label::NonIronic), "NOT_IRONIC");
        for label in Label::ALL {
            assert_eq!(parse_label(render_label(label)), Ok(label));
        }
    }

    #[test]
    fn round_bounds() {
        assert!(Round::new(0).is_err());
        assert!(Round::new(4).is_err());
        assert_eq!(Round::new(2).unwrap().get(), 2);
        assert!(serde_json::from_str::<Round>("4").is_err());
    }

    #[test]
    fn agent_ordering_is_stable() {
        let mut agents = vec![AgentId::Rhetoric, AgentId::Context, AgentId::Semantic];
        agents.sort();
        assert_eq!(agents, AgentId::ALL.to_vec());
        assert_eq!(serde_json::to_string(&AgentId::Semantic).unwrap(), "\"SA\"");
    }

    #[test]
    fn sample_rejects_blank_text() {
        assert_eq!(
            Sample::new("a", "  \n", vec![], None),
            Err(DomainError::EmptyText)
        );
        assert!(serde_json::from_str::<Sample>(r#"{"id":"a","text":" "}"#).is_err());
    }

    #[test]
    fn judgment_needs_reasoning_unless_abstaining() {
        assert!(Judgment::new(
            AgentId::Context,
            Round::INDEPENDENT,
            Verdict::Ironic,
            "",
            ""
        )
        .is_err());
        assert!(Judgment::new(
            AgentId::Context,
            Round::INDEPENDENT,
            Verdict::Abstain,
            "",
            "x"
        )
        .is_ok());
    }

    #[test]
    fn reevaluation_enforces_trigger_rule() {
        let fb = FeedbackTriplet {
            f_ca: "check".into(),
            ..Default::default()
        };
        assert!(ReEvaluation::new(Confidence::High, false, Some(fb.clone())).is_err());
        assert!(ReEvaluation::new(Confidence::Medium, false, Some(fb.clone())).is_err());
        assert!(ReEvaluation::new(Confidence::Low, false, None).is_err());
        assert!(
            ReEvaluation::new(Confidence::Low, false, Some(FeedbackTriplet::default())).is_err()
        );
        let ev = ReEvaluation::new(Confidence::Medium, true, Some(fb)).unwrap();
        assert!(ev.r_needed());

        let forged = r#"{"confidence":"high","contradiction":false,"r_needed":true,"feedback":{"f_ca":"x","f_sa":"","f_ra":""}}"#;
        assert!(serde_json::from_str::<ReEvaluation>(forged).is_err());
        let json = serde_json::to_string(&ev).unwrap();
        assert_eq!(serde_json::from_str::<ReEvaluation>(&json).unwrap(), ev);
    }

    #[test]
    fn label_json_round_trip() {
        for label in Label::ALL {
            let json = serde_json::to_string(&label).unwrap();
            assert_eq!(serde_json::from_str::<Label>(&json).unwrap(), label);
        }
        assert_eq!(
            serde_json::to_string(&Label::NonIronic).unwrap(),
            "\"non_ironic\""
        );
    }
}
