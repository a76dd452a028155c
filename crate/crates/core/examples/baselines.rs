//! Compares the single-call baselines (io, cot, explanation-augmented)
//! with the full pipeline on one fixture. The explanation-augmented
//! baseline reuses round-1 reasoning from the pipeline traces.
//!
//!     cargo run --example baselines

use std::sync::Arc;

use irony_agents::backend::MockBackend;
use irony_agents::data::{self, DatasetName};
use irony_agents::eval::scripts::{gold_script, ScriptPlan};
use irony_agents::eval::{
    render_results_table, run_baseline, run_benchmark, BaselineMode, Explanations,
};
use irony_agents::orchestrator::RunConfig;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: Vec<_> = data::load_fixture(DatasetName::SemEval2018)?
        .into_iter()
        .take(80)
        .collect();
    let (script, _) = gold_script(&samples, &ScriptPlan::default());
    let config = RunConfig::default();
    let backend = || Arc::new(MockBackend::new(script.clone()));

    let full = run_benchmark("SemEval-2018", &samples, &config, backend()).await?;
    let traces: Vec<_> = full.outcomes.iter().map(|o| &o.trace).collect();
    let explanations = Explanations::from_traces(traces);

    let mut reports = Vec::new();
    for mode in [
        BaselineMode::Io,
        BaselineMode::Cot,
        BaselineMode::ExplanationAugmented,
    ] {
        let extra = (mode == BaselineMode::ExplanationAugmented).then_some(&explanations);
        let run = run_baseline("SemEval-2018", &samples, mode, &config, backend(), extra).await?;
        reports.push(run.report);
    }
    reports.push(full.report);
    println!("{}", render_results_table(&reports));
    Ok(())
}
