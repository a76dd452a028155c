//! Records a benchmark run into a replay store, then replays it twice in
//! strict mode and checks that the reports are byte-identical.
//!
//!     cargo run --example record_replay

use std::sync::Arc;

use irony_agents::backend::{MockBackend, RecordingBackend, ReplayBackend, ReplayStore};
use irony_agents::data::{self, DatasetName};
use irony_agents::eval::scripts::{gold_script, ScriptPlan};
use irony_agents::eval::{run_benchmark, ReportDocument};
use irony_agents::orchestrator::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A paused clock makes recorded latencies replay exactly.
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("replay.jsonl");
    let samples: Vec<_> = data::load_fixture(DatasetName::IacV1)?
        .into_iter()
        .take(20)
        .collect();
    let config = RunConfig::default();

    let plan = ScriptPlan {
        latency_ms: Some(40),
        ..ScriptPlan::default()
    };
    let store = Arc::new(ReplayStore::open(&path)?);
    let mock = Arc::new(MockBackend::new(gold_script(&samples, &plan).0));
    let recorded = rt.block_on(run_benchmark(
        "IAC-V1",
        &samples,
        &config,
        Arc::new(RecordingBackend::new(mock, store.clone())),
    ))?;
    println!("recorded {} responses to {}", store.len(), path.display());

    let replay = || -> Result<String, Box<dyn std::error::Error>> {
        let backend =
            ReplayBackend::new(Arc::new(ReplayStore::load(&path)?)).with_simulated_latency(true);
        let run = rt.block_on(run_benchmark(
            "IAC-V1",
            &samples,
            &config,
            Arc::new(backend),
        ))?;
        Ok(ReportDocument::Benchmark {
            reports: vec![run.report],
        }
        .to_json())
    };
    let (a, b) = (replay()?, replay()?);
    let original = ReportDocument::Benchmark {
        reports: vec![recorded.report],
    }
    .to_json();
    println!("replay matches recording: {}", a == original);
    println!("replays byte-identical:   {}", a == b);
    Ok(())
}
