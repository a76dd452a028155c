//! Collaborative multi-agent irony detection.
//!
//! Three analysis agents (context, semantics, rhetoric) judge a text
//! independently, then again after reading each other's reasoning. A decision
//! layer aggregates the second-round verdicts by consensus, majority, or
//! arbitration over the reasoning traces, and an evaluator decides whether a
//! single feedback-guided refinement round is needed.
//!
//! See the crate's `examples/` directory for runnable walkthroughs.

pub mod agents;
pub mod backend;
pub mod cli;
pub mod config;
pub mod data;
pub mod decision;
pub mod domain;
pub mod error;
pub mod eval;
pub mod orchestrator;
pub mod refine;
pub mod trace;

pub use domain::{
    parse_label, refinement_needed, render_label, AgentId, Confidence, Decision, FeedbackTriplet,
    Judgment, Label, Method, ReEvaluation, Round, Sample, Stage, Verdict,
};
pub use error::PipelineError;
