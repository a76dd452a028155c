//! Benchmarks the full pipeline on every bundled fixture with a scripted
//! backend scripted from the gold labels, then prints the results table.
//!
//!     cargo run --example benchmark_fixture [limit]

use std::sync::Arc;

use irony_agents::backend::MockBackend;
use irony_agents::data::{self, DatasetName};
use irony_agents::eval::scripts::{gold_script, ScriptPlan};
use irony_agents::eval::{render_results_table, run_benchmark};
use irony_agents::orchestrator::RunConfig;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let limit: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(100);
    let config = RunConfig::default();
    let mut reports = Vec::new();
    for name in DatasetName::BENCHMARKS {
        let samples: Vec<_> = data::load_fixture(name)?.into_iter().take(limit).collect();
        let (script, _) = gold_script(&samples, &ScriptPlan::default());
        let run = run_benchmark(
            name.title(),
            &samples,
            &config,
            Arc::new(MockBackend::new(script)),
        )
        .await?;
        eprintln!(
            "{:<14} {} samples, {} refined, {:.2} calls/sample",
            name.title(),
            run.report.samples,
            run.report.refined_decisions,
            run.report.mean_backend_calls
        );
        reports.push(run.report);
    }
    println!("{}", render_results_table(&reports));
    Ok(())
}
