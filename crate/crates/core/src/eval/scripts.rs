//! Mock scripts that follow each sample's gold label, for offline benchmark
//! runs over the synthetic fixtures.
//!
//! Every sample is assigned one of three scenarios:
//! - clean: all agents give the gold verdict; the evaluator is confident.
//! - dissent: one agent disagrees in rounds 1 and 2; the majority is right.
//! - flip: two agents are wrong in rounds 1 and 2, the evaluator reports low
//!   confidence, and all agents give the gold verdict after feedback. Without
//!   refinement these samples end with the wrong label.
//!
//! Baseline prompts answer correctly on clean samples only.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::MockScript;
use crate::domain::{render_label, AgentId, Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Clean,
    Dissent,
    Flip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptPlan {
    pub dissent_rate: f64,
    pub flip_rate: f64,
    pub seed: u64,
    pub latency_ms: Option<u64>,
}

impl Default for ScriptPlan {
    fn default() -> Self {
        ScriptPlan {
            dissent_rate: 0.2,
            flip_rate: 0.1,
            seed: 7,
            latency_ms: None,
        }
    }
}

impl ScriptPlan {
    /// Every sample clean.
    pub fn agreeing() -> ScriptPlan {
        ScriptPlan {
            dissent_rate: 0.0,
            flip_rate: 0.0,
            ..ScriptPlan::default()
        }
    }

    /// Every sample a flip.
    pub fn flipping() -> ScriptPlan {
        ScriptPlan {
            dissent_rate: 0.0,
            flip_rate: 1.0,
            ..ScriptPlan::default()
        }
    }
}

fn agent_answer(label: Label, agent: AgentId) -> String {
    let reasoning = match (label, agent) {
        (Label::Ironic, AgentId::Context) => {
            "The remark runs against the situation the dialogue describes."
        }
        (Label::Ironic, AgentId::Semantic) => {
            "Positive wording is attached to an outcome nobody would welcome."
        }
        (Label::Ironic, AgentId::Rhetoric) => "Exaggerated praise works as a mocking device here.",
        (Label::NonIronic, AgentId::Context) => {
            "The remark fits the surrounding situation at face value."
        }
        (Label::NonIronic, AgentId::Semantic) => {
            "The literal meaning and the evident intent coincide."
        }
        (Label::NonIronic, AgentId::Rhetoric) => "No device signals a reversal of meaning.",
    };
    format!("VERDICT: {}\nREASONING: {reasoning}", render_label(label))
}

fn evaluator_answer(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Clean => "CONFIDENCE: HIGH\nCONTRADICTION: NO",
        Scenario::Dissent => "CONFIDENCE: MEDIUM\nCONTRADICTION: NO",
        Scenario::Flip => {
            "CONFIDENCE: LOW\nCONTRADICTION: YES\n\
FEEDBACK_CA: Weigh the dialogue context against the literal remark.\n\
FEEDBACK_SA: Compare the expressed emotion with the emotion the situation warrants.\n\
FEEDBACK_RA: Check whether the praise is exaggerated for effect."
        }
    }
}

/// Builds a per-sample script. Unlabeled samples are scripted as ironic.
pub fn gold_script(
    samples: &[Sample],
    plan: &ScriptPlan,
) -> (MockScript, BTreeMap<String, Scenario>) {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut script = MockScript {
        latency_ms: plan.latency_ms,
        ..MockScript::default()
    }
    .respond("DJ", ["The panel's reasoning supports the decision."; 2]);
    let mut scenarios = BTreeMap::new();
    for sample in samples {
        let gold = sample.gold.unwrap_or(Label::Ironic);
        let draw: f64 = rng.gen();
        let scenario = if draw < plan.flip_rate {
            Scenario::Flip
        } else if draw < plan.flip_rate + plan.dissent_rate {
            Scenario::Dissent
        } else {
            Scenario::Clean
        };
        let mut agents = AgentId::ALL.to_vec();
        agents.shuffle(&mut rng);
        let wrong: &[AgentId] = match scenario {
            Scenario::Clean => &[],
            Scenario::Dissent => &agents[..1],
            Scenario::Flip => &agents[..2],
        };
        let id = sample.id.as_str();
        for agent in AgentId::ALL {
            let early = if wrong.contains(&agent) {
                gold.flipped()
            } else {
                gold
            };
            for round in 1..=2 {
                script = script.respond_for(
                    id,
                    &format!("{}:{round}", agent.code()),
                    [agent_answer(early, agent)],
                );
            }
            script = script.respond_for(
                id,
                &format!("{}:3", agent.code()),
                [agent_answer(gold, agent)],
            );
        }
        let arbiter = format!(
            "RATIONALE: The {} argument is the most coherent.\nVERDICT: {}",
            if gold == Label::Ironic {
                "ironic"
            } else {
                "literal"
            },
            render_label(gold)
        );
        let baseline = if scenario == Scenario::Clean {
            gold
        } else {
            gold.flipped()
        };
        script = script
            .respond_for(id, "DA", [arbiter.clone(), arbiter])
            .respond_for(id, "RE", [evaluator_answer(scenario)])
            .respond_for(
                id,
                "BASELINE",
                [format!("VERDICT: {}", render_label(baseline))],
            );
        scenarios.insert(sample.id.clone(), scenario);
    }
    (script, scenarios)
}
