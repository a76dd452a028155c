//! Classifies one utterance against a scripted backend and prints the
//! decision followed by the full trace.
//!
//!     cargo run --example classify_mock

use std::sync::Arc;

use irony_agents::backend::{MockBackend, MockScript};
use irony_agents::orchestrator::{Pipeline, RunConfig};
use irony_agents::{render_label, Sample};

fn answer(verdict: &str, reasoning: &str) -> String {
    format!("VERDICT: {verdict}\nREASONING: {reasoning}")
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sample = Sample::new(
        "demo",
        "Great, another Monday morning meeting about meetings.",
        vec!["A: The calendar invite just landed.".into()],
        None,
    )?;

    // Context and rhetoric agree; the semantic agent holds out until it sees its peers.
    let script = MockScript::default()
        .respond(
            "CA",
            vec![answer("IRONIC", "Nobody welcomes a meeting about meetings."); 3],
        )
        .respond(
            "SA",
            [
                answer("NOT_IRONIC", "'Great' is literally positive."),
                answer("IRONIC", "Read against the context, 'great' is inverted."),
            ],
        )
        .respond(
            "RA",
            vec![answer("IRONIC", "Mock enthusiasm with hyperbolic framing."); 3],
        )
        .respond("RE", ["CONFIDENCE: HIGH\nCONTRADICTION: NO"]);

    let pipeline = Pipeline::new(RunConfig::default(), Arc::new(MockBackend::new(script)))?;
    let outcome = pipeline.run_sample(&sample).await;
    let decision = outcome.result?;

    println!("label          {}", render_label(decision.label));
    println!("method         {:?}", decision.method);
    println!("stage          {:?}", decision.stage);
    println!("backend calls  {}", outcome.trace.total_backend_calls);
    println!("justification  {}", decision.justification);
    println!();
    println!("{}", serde_json::to_string_pretty(&outcome.trace)?);
    Ok(())
}
