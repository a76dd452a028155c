use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use irony_agents::backend::{
    BackendError, CallTag, ChatBackend, ChatRequest, ChatResponse, MockBackend, RecordingBackend,
    ReplayBackend, ReplayStore,
};
use irony_agents::data::{self, DatasetName};
use irony_agents::eval::scripts::{gold_script, ScriptPlan};
use irony_agents::eval::{run_benchmark, ReportDocument};
use irony_agents::orchestrator::{Pipeline, RunConfig};
use irony_agents::trace::PipelineStage;
use irony_agents::{AgentId, Label, Method, PipelineError, Stage};

mod common;

#[tokio::test]
async fn case_study_refinement_corrects_the_majority() {
    let full = Pipeline::new(
        RunConfig::default(),
        Arc::new(MockBackend::new(common::case_script())),
    )
    .unwrap();
    let out = full.run_sample(&common::case_sample()).await;
    let d = out.result.unwrap();
    assert_eq!(
        (d.label, d.stage, d.method),
        (Label::NonIronic, Stage::Refined, Method::Majority)
    );
    let initial = out.trace.decisions().next().unwrap();
    assert_eq!(
        (initial.label, initial.stage),
        (Label::Ironic, Stage::Initial)
    );
    assert!(out.trace.evaluation().unwrap().r_needed());
    assert_eq!(out.trace.total_backend_calls, 10);

    let ablated = Pipeline::new(
        RunConfig::default().without_refinement(),
        Arc::new(MockBackend::new(common::case_script())),
    )
    .unwrap();
    let d = ablated
        .run_sample(&common::case_sample())
        .await
        .result
        .unwrap();
    assert_eq!((d.label, d.stage), (Label::Ironic, Stage::Initial));
}

#[tokio::test]
async fn feedback_reaches_each_agent() {
    #[derive(Default)]
    struct Capture(Mutex<Vec<(String, String)>>);
    struct Spy(Arc<Capture>, MockBackend);
    #[async_trait]
    impl ChatBackend for Spy {
        async fn complete(
            &self,
            r: &ChatRequest,
            t: &CallTag,
        ) -> Result<ChatResponse, BackendError> {
            self.0
                 .0
                .lock()
                .unwrap()
                .push((t.selector(), r.prompt().to_string()));
            self.1.complete(r, t).await
        }
    }
    let cap = Arc::new(Capture::default());
    let p = Pipeline::new(
        RunConfig::default(),
        Arc::new(Spy(cap.clone(), MockBackend::new(common::case_script()))),
    )
    .unwrap();
    p.run_sample(&common::case_sample()).await.result.unwrap();
    let calls = cap.0.lock().unwrap();
    let prompt = |sel: &str| {
        calls
            .iter()
            .find(|(s, _)| s == sel)
            .map(|(_, p)| p.clone())
            .unwrap()
    };
    assert!(prompt("RA:3").contains("Check whether 'really' reverses the meaning"));
    assert!(prompt("SA:3").contains("Is there evidence the gratitude is insincere?"));
    assert!(!prompt("SA:3").contains("'really' reverses"));
    assert!(prompt("CA:1").contains("The release is tomorrow"));
    assert!(prompt("SA:2").contains("[Context Agent (CA), round 1]"));
    assert!(!prompt("SA:2").contains("[Semantic Agent (SA)"));
}

fn twenty() -> Vec<irony_agents::Sample> {
    data::load_fixture(DatasetName::IacV1)
        .unwrap()
        .into_iter()
        .take(20)
        .collect()
}

fn paused() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()
        .unwrap()
}

#[test]
fn replayed_benchmark_is_byte_identical_and_misses_name_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let samples = twenty();
    let plan = ScriptPlan {
        latency_ms: Some(35),
        ..ScriptPlan::default()
    };
    let config = RunConfig::default();

    let store = Arc::new(ReplayStore::open(&path).unwrap());
    let mock = Arc::new(MockBackend::new(gold_script(&samples, &plan).0));
    let recorded = paused()
        .block_on(run_benchmark(
            "IAC-V1",
            &samples,
            &config,
            Arc::new(RecordingBackend::new(mock, store)),
        ))
        .unwrap();
    assert_eq!(recorded.report.failed_samples, 0);

    let replay = |path: &std::path::Path| {
        let store = Arc::new(ReplayStore::load(path).unwrap());
        let backend = Arc::new(ReplayBackend::new(store).with_simulated_latency(true));
        let run = paused()
            .block_on(run_benchmark("IAC-V1", &samples, &config, backend))
            .unwrap();
        (
            ReportDocument::Benchmark {
                reports: vec![run.report.clone()],
            }
            .to_json(),
            run,
        )
    };
    let (a, run_a) = replay(&path);
    let (b, _) = replay(&path);
    assert_eq!(a.as_bytes(), b.as_bytes());
    assert_eq!(run_a.report.accuracy, recorded.report.accuracy);
    assert_eq!(run_a.report.latency, recorded.report.latency);

    // Drop the entry for the first sample's RE call.
    let victim = run_a.outcomes[0]
        .trace
        .events
        .iter()
        .find_map(|e| match &e.kind {
            irony_agents::trace::EventKind::BackendCall {
                selector, digest, ..
            } if selector == "RE" => Some(digest.clone()),
            _ => None,
        })
        .unwrap();
    let kept: String = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains(&format!("\"key\":\"{victim}\"")))
        .map(|l| format!("{l}\n"))
        .collect();
    let pruned = dir.path().join("pruned.jsonl");
    std::fs::write(&pruned, kept).unwrap();
    let (_, run) = replay(&pruned);
    assert_eq!(run.report.failed_samples, 1);
    match &run.outcomes[0].result {
        Err(PipelineError::Backend(BackendError::ReplayMiss { digest })) => {
            assert_eq!(digest, &victim)
        }
        other => panic!("expected replay miss, got {other:?}"),
    }
}

/// Tracks how many distinct samples have a call in flight.
struct Gauge {
    inner: MockBackend,
    active: Mutex<Vec<String>>,
    peak: Mutex<usize>,
}

#[async_trait]
impl ChatBackend for Gauge {
    async fn complete(&self, r: &ChatRequest, t: &CallTag) -> Result<ChatResponse, BackendError> {
        {
            let mut a = self.active.lock().unwrap();
            a.push(t.sample_id.clone());
            let distinct = a.iter().collect::<HashSet<_>>().len();
            let mut peak = self.peak.lock().unwrap();
            *peak = (*peak).max(distinct);
        }
        let resp = self.inner.complete(r, t).await;
        let mut a = self.active.lock().unwrap();
        let i = a.iter().position(|s| s == &t.sample_id).unwrap();
        a.remove(i);
        resp
    }
}

#[test]
fn batch_respects_the_parallel_limit_and_keeps_order() {
    let samples: Vec<_> = data::load_fixture(DatasetName::SemEval2018)
        .unwrap()
        .into_iter()
        .take(8)
        .collect();
    let script = common::agree_script("IRONIC").with_latency(Duration::from_millis(100));
    let gauge = Arc::new(Gauge {
        inner: MockBackend::new(script),
        active: Mutex::default(),
        peak: Mutex::default(),
    });
    let config = RunConfig {
        max_parallel_samples: 2,
        ..RunConfig::default()
    };
    let pipeline = Pipeline::new(config, gauge.clone()).unwrap();
    let rt = paused();
    let (outcomes, elapsed) = rt.block_on(async {
        let start = tokio::time::Instant::now();
        let o = pipeline.run_batch(&samples).await;
        (o, start.elapsed())
    });
    assert_eq!(*gauge.peak.lock().unwrap(), 2);
    let ids: Vec<_> = outcomes.iter().map(|o| o.sample_id.clone()).collect();
    let want: Vec<_> = samples.iter().map(|s| s.id.clone()).collect();
    assert_eq!(ids, want);
    // Three sequential call waves per sample (round 1, round 2, evaluator),
    // four pairs of samples.
    assert_eq!(elapsed, Duration::from_millis(4 * 300));
    for o in &outcomes {
        assert_eq!(o.trace.wall_time_ms, 300.0);
    }
}

#[tokio::test]
async fn call_accounting_holds_across_scenarios() {
    let samples: Vec<_> = data::load_fixture(DatasetName::Mustard)
        .unwrap()
        .into_iter()
        .take(40)
        .collect();
    let plan = ScriptPlan {
        dissent_rate: 0.4,
        flip_rate: 0.3,
        ..ScriptPlan::default()
    };
    for config in [
        RunConfig::default(),
        RunConfig::default().without_agent(AgentId::Context),
        RunConfig {
            llm_justification: true,
            ..RunConfig::default()
        },
    ] {
        let backend = Arc::new(MockBackend::new(gold_script(&samples, &plan).0));
        let run = run_benchmark("MuSTARD", &samples, &config, backend)
            .await
            .unwrap();
        assert_eq!(run.report.failed_samples, 0);
        for o in &run.outcomes {
            let t = &o.trace;
            assert_eq!(
                t.total_backend_calls,
                t.attributed_backend_calls(),
                "{}",
                o.sample_id
            );
            assert_eq!(t.total_backend_calls as usize, t.backend_call_events());
            let stages = t.stages();
            assert_eq!(
                &stages[..3],
                &[
                    PipelineStage::IndependentRound,
                    PipelineStage::CollaborativeRound,
                    PipelineStage::InitialDecision
                ]
            );
        }
    }
}
