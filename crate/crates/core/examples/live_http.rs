//! Classifies a few fixture samples against a live chat-completions
//! endpoint. Needs `CAF_API_KEY`; `CAF_BASE_URL` and `CAF_MODEL` are optional.
//!
//!     CAF_API_KEY=sk-... cargo run --example live_http

use std::sync::Arc;

use irony_agents::backend::{HttpBackend, HttpConfig, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
use irony_agents::data::{self, DatasetName};
use irony_agents::orchestrator::{Pipeline, RunConfig};
use irony_agents::render_label;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Ok(key) = std::env::var(API_KEY_ENV) else {
        eprintln!("{API_KEY_ENV} is not set");
        std::process::exit(2);
    };
    let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.into());
    let mut config = RunConfig::default();
    if let Ok(model) = std::env::var("CAF_MODEL") {
        config.model = model;
    }
    let pipeline = Pipeline::new(
        config,
        Arc::new(HttpBackend::new(HttpConfig::new(base, key))?),
    )?;
    let samples: Vec<_> = data::load_fixture(DatasetName::SemEval2018)?
        .into_iter()
        .take(3)
        .collect();
    for outcome in pipeline.run_batch(&samples).await {
        match &outcome.result {
            Ok(d) => println!(
                "{:<16} {:<11} {:>5.1} s  {}",
                outcome.sample_id,
                render_label(d.label),
                outcome.trace.wall_time_ms / 1000.0,
                d.justification
            ),
            Err(e) => println!("{:<16} failed: {e}", outcome.sample_id),
        }
    }
    Ok(())
}
