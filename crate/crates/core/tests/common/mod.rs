//! Scripts shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use irony_agents::backend::MockScript;
use irony_agents::{Label, Sample};

pub fn answer(verdict: &str, reasoning: &str) -> String {
    format!("VERDICT: {verdict}\nREASONING: {reasoning}")
}

/// Every agent, every round, the same verdict; evaluator confident.
pub fn agree_script(verdict: &str) -> MockScript {
    let mut script = MockScript::default();
    for a in ["CA", "SA", "RA"] {
        script = script.respond(a, vec![answer(verdict, "consistent reading"); 3]);
    }
    script.respond("RE", ["CONFIDENCE: HIGH\nCONTRADICTION: NO"])
}

/// Like [`agree_script`] but the evaluator always asks for refinement.
pub fn refine_script(verdict: &str) -> MockScript {
    agree_script(verdict).respond(
        "RE",
        ["CONFIDENCE: LOW\nCONTRADICTION: NO\nFEEDBACK_CA: a\nFEEDBACK_SA: b\nFEEDBACK_RA: c"],
    )
}

pub const CASE_ID: &str = "case-1";

/// A sincere remark that two agents over-read as sarcasm.
pub fn case_sample() -> Sample {
    Sample::new(
        CASE_ID,
        "Thanks for staying late to help me fix the build, I really appreciate it.",
        vec!["A: The release is tomorrow and the build is still red.".into()],
        Some(Label::NonIronic),
    )
    .unwrap()
}

/// The context agent finds no inconsistency; semantics and rhetoric read
/// the gratitude as mock praise through round 2. The evaluator flags low
/// confidence, and after feedback the rhetoric agent revises its verdict.
pub fn case_script() -> MockScript {
    let ca = answer(
        "NOT_IRONIC",
        "Staying late before a release is a plausible favour; the thanks fits the situation.",
    );
    let sa_wrong = answer(
        "IRONIC",
        "'Really appreciate' could be exaggerated gratitude.",
    );
    let ra_wrong = answer("IRONIC", "The intensifier 'really' may signal mock praise.");
    let ra_fixed = answer(
        "NOT_IRONIC",
        "On re-reading, the intensifier is sincere emphasis; there is no reversal.",
    );
    MockScript::default()
        .respond_for(CASE_ID, "CA", vec![ca; 3])
        .respond_for(CASE_ID, "SA", vec![sa_wrong; 3])
        .respond_for(CASE_ID, "RA:1", [ra_wrong.clone()])
        .respond_for(CASE_ID, "RA:2", [ra_wrong])
        .respond_for(CASE_ID, "RA:3", [ra_fixed])
        .respond_for(
            CASE_ID,
            "RE",
            ["CONFIDENCE: LOW\nCONTRADICTION: YES\n\
FEEDBACK_CA: Keep checking the situation against the remark.\n\
FEEDBACK_SA: Is there evidence the gratitude is insincere?\n\
FEEDBACK_RA: Check whether 'really' reverses the meaning or only emphasizes it."],
        )
}
