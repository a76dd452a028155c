//! Lets the context agent request background knowledge. The agent answers
//! round 1 with a SEARCH line, the provider returns canned documents, and
//! the summarised result is fed back before the agent gives its verdict.
//!
//!     cargo run --example search_context

use std::collections::BTreeMap;
use std::sync::Arc;

use irony_agents::backend::{Document, MockBackend, MockScript, ScriptedSearch};
use irony_agents::orchestrator::{Pipeline, RunConfig};
use irony_agents::trace::EventKind;
use irony_agents::Sample;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = "Fyre Festival outcome";
    let search = ScriptedSearch {
        queries: BTreeMap::from([(
            query.to_string(),
            vec![Document {
                title: "Fyre Festival".into(),
                snippet:
                    "The 2017 festival collapsed; guests were stranded with cheese sandwiches."
                        .into(),
            }],
        )]),
        ..ScriptedSearch::default()
    };
    let script = MockScript::default()
        .respond(
            "CA",
            [
                format!("SEARCH: {query}"),
                "VERDICT: IRONIC\nREASONING: The festival was a famous disaster.".into(),
                "VERDICT: IRONIC\nREASONING: Peers agree.".into(),
            ],
        )
        .respond(
            "SEARCH",
            ["The festival collapsed and guests were stranded."],
        )
        .respond(
            "SA",
            vec!["VERDICT: IRONIC\nREASONING: Praise for a disaster.".to_string(); 2],
        )
        .respond(
            "RA",
            vec!["VERDICT: IRONIC\nREASONING: Hyperbolic praise.".to_string(); 2],
        )
        .respond("RE", ["CONFIDENCE: HIGH\nCONTRADICTION: NO"]);

    let config = RunConfig {
        search_enabled: true,
        ..RunConfig::default()
    };
    let pipeline =
        Pipeline::new(config, Arc::new(MockBackend::new(script)))?.with_search(Arc::new(search));
    let sample = Sample::new(
        "fyre",
        "Best-organised festival of 2017, the catering was superb.",
        vec![],
        None,
    )?;
    let outcome = pipeline.run_sample(&sample).await;

    for event in &outcome.trace.events {
        if let EventKind::Search { .. } = &event.kind {
            println!("{}", serde_json::to_string_pretty(&event.kind)?);
        }
    }
    println!(
        "label {:?}, {} backend calls",
        outcome.result?.label, outcome.trace.total_backend_calls
    );
    Ok(())
}
