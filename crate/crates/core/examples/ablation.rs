//! Runs the ablation study (full, -CA, -SA, -RA, -REAgent) on a fixture.
//! Each variant gets a fresh scripted backend.
//!
//!     cargo run --example ablation

use std::sync::Arc;

use irony_agents::backend::{ChatBackend, MockBackend};
use irony_agents::data::{self, DatasetName};
use irony_agents::eval::scripts::{gold_script, ScriptPlan};
use irony_agents::eval::{render_ablation_table, run_ablation};
use irony_agents::orchestrator::RunConfig;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: Vec<_> = data::load_fixture(DatasetName::Mustard)?
        .into_iter()
        .take(120)
        .collect();
    let (script, _) = gold_script(
        &samples,
        &ScriptPlan {
            flip_rate: 0.25,
            ..ScriptPlan::default()
        },
    );
    let backend_for =
        |_: &str| -> Arc<dyn ChatBackend> { Arc::new(MockBackend::new(script.clone())) };

    let run = run_ablation("MuSTARD", &samples, &RunConfig::default(), &backend_for).await?;
    println!("{}", render_ablation_table(&run.report));
    for (variant, delta) in run.report.macro_f1_deltas() {
        println!("{variant:<10} {:+.2} points", delta * 100.0);
    }
    Ok(())
}
