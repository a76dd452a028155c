//! Overrides one prompt template, checks that the set still validates and
//! shows the version tag stamped into traces. Also shows the error for a
//! template that references an unknown placeholder.
//!
//!     cargo run --example custom_templates

use std::sync::Arc;

use irony_agents::agents::{PromptTemplate, TemplateSet};
use irony_agents::backend::{MockBackend, MockScript};
use irony_agents::orchestrator::{Pipeline, RunConfig};
use irony_agents::{AgentId, Round, Sample};

const RA_ROUND1: &str = "#version ra-terse-1
You are a rhetoric analyst. Look for hyperbole, mock praise and rhetorical questions.

Utterance: {text}
{context_turns}

Answer with
RHETORICAL_DEVICES: <devices or none>
REASONING: <one or two sentences>
VERDICT: IRONIC or NOT_IRONIC
";

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut templates = TemplateSet::builtin();
    println!("builtin version  {}", templates.version());
    templates.insert(PromptTemplate::parse(
        AgentId::Rhetoric,
        Round::INDEPENDENT,
        RA_ROUND1,
    ));
    templates.validate(&AgentId::ALL)?;
    println!("custom version   {}", templates.version());

    let script = MockScript::default()
        .respond("CA", vec!["VERDICT: IRONIC\nREASONING: r"; 2])
        .respond("SA", vec!["VERDICT: IRONIC\nREASONING: r"; 2])
        .respond(
            "RA",
            vec!["RHETORICAL_DEVICES: mock praise\nVERDICT: IRONIC\nREASONING: r"; 2],
        )
        .respond("RE", ["CONFIDENCE: HIGH\nCONTRADICTION: NO"]);
    let pipeline = Pipeline::with_templates(
        RunConfig::default(),
        Arc::new(MockBackend::new(script)),
        templates.clone(),
    )?;
    let sample = Sample::new("t", "What a lovely traffic jam.", vec![], None)?;
    let outcome = pipeline.run_sample(&sample).await;
    println!("trace version    {}", outcome.trace.template_version);
    println!("label            {:?}", outcome.result?.label);

    templates.insert(PromptTemplate::parse(
        AgentId::Rhetoric,
        Round::INDEPENDENT,
        "Judge {txt}.",
    ));
    match templates.validate(&AgentId::ALL) {
        Ok(()) => println!("unexpectedly valid"),
        Err(e) => println!("rejected         {e}"),
    }
    Ok(())
}
