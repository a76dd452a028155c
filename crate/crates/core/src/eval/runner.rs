use std::sync::Arc;

use futures::stream::{self, StreamExt};
use thiserror::Error;

use super::baseline::{baseline_prompt, parse_verdict, BaselineMode, Explanations};
use super::report::{AblationReport, MetricsReport, Scored};
use crate::backend::{CallRole, ChatBackend, ChatRequest, Message};
use crate::domain::{AgentId, Label, Sample, Stage, Verdict};
use crate::error::PipelineError;
use crate::orchestrator::{Pipeline, RunConfig, SampleOutcome};
use crate::trace::{EventKind, PipelineStage, PipelineTrace, TraceRecorder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("sample {0:?} has no gold label")]
    MissingGold(String),
    #[error("no round-1 explanation{} for sample {sample_id:?}", agent.map(|a| format!(" from {}", a.code())).unwrap_or_default())]
    MissingTraces {
        sample_id: String,
        agent: Option<AgentId>,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn golds(samples: &[Sample]) -> Result<Vec<Label>, EvalError> {
    samples
        .iter()
        .map(|s| s.gold.ok_or_else(|| EvalError::MissingGold(s.id.clone())))
        .collect()
}

/// `full` for the complete system, otherwise the removed parts, e.g. `-RA`
/// or `-CA-REAgent`.
pub fn variant_name(config: &RunConfig) -> String {
    let mut name: String = AgentId::ALL
        .iter()
        .filter(|a| !config.enabled_agents.contains(a))
        .map(|a| format!("-{}", a.code()))
        .collect();
    if !config.refinement_enabled {
        name.push_str("-REAgent");
    }
    if name.is_empty() {
        "full".into()
    } else {
        name
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: MetricsReport,
    pub outcomes: Vec<SampleOutcome>,
}

pub async fn run_benchmark(
    dataset: &str,
    samples: &[Sample],
    config: &RunConfig,
    backend: Arc<dyn ChatBackend>,
) -> Result<BenchmarkRun, EvalError> {
    let pipeline = Pipeline::new(config.clone(), backend)?;
    run_benchmark_with(&pipeline, dataset, samples).await
}

/// Runs an already-built pipeline (e.g. one with a search provider).
pub async fn run_benchmark_with(
    pipeline: &Pipeline,
    dataset: &str,
    samples: &[Sample],
) -> Result<BenchmarkRun, EvalError> {
    let golds = golds(samples)?;
    let outcomes = pipeline.run_batch(samples).await;
    let items: Vec<Scored<'_>> = outcomes
        .iter()
        .zip(&golds)
        .map(|(o, &gold)| Scored {
            gold,
            prediction: o.decision().map(|d| d.label),
            refined: o.decision().is_some_and(|d| d.stage == Stage::Refined),
            trace: &o.trace,
        })
        .collect();
    let report = MetricsReport::from_scored(dataset, &variant_name(pipeline.config()), &items);
    Ok(BenchmarkRun { report, outcomes })
}

/// Full system, then without each agent, then without refinement.
pub fn ablation_variants(base: &RunConfig) -> Vec<RunConfig> {
    let full = RunConfig {
        enabled_agents: AgentId::ALL.into_iter().collect(),
        refinement_enabled: true,
        ..base.clone()
    };
    let mut variants = vec![full.clone()];
    variants.extend(AgentId::ALL.map(|a| full.clone().without_agent(a)));
    variants.push(full.without_refinement());
    variants
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub report: AblationReport,
    pub runs: Vec<BenchmarkRun>,
}

/// Runs every ablation variant. `backend_for` is asked for a backend per
/// variant name, so stateful backends (mock scripts) can start fresh while
/// replay stores are shared.
pub async fn run_ablation(
    dataset: &str,
    samples: &[Sample],
    config: &RunConfig,
    backend_for: &(dyn Fn(&str) -> Arc<dyn ChatBackend> + Sync),
) -> Result<AblationRun, EvalError> {
    golds(samples)?;
    let mut runs = Vec::new();
    for variant in ablation_variants(config) {
        let backend = backend_for(&variant_name(&variant));
        runs.push(run_benchmark(dataset, samples, &variant, backend).await?);
    }
    Ok(AblationRun {
        report: AblationReport {
            dataset: dataset.to_string(),
            variants: runs.iter().map(|r| r.report.clone()).collect(),
        },
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub report: MetricsReport,
    pub predictions: Vec<Option<Label>>,
    pub traces: Vec<PipelineTrace>,
}

async fn baseline_sample(
    mode: BaselineMode,
    sample: &Sample,
    explanations: &[(AgentId, String)],
    config: &RunConfig,
    backend: &dyn ChatBackend,
) -> (Option<Label>, PipelineTrace) {
    let trace = TraceRecorder::new(&sample.id);
    trace.stage(PipelineStage::Baseline);
    let request = ChatRequest {
        model: config.model.clone(),
        temperature: config.temperature,
        messages: vec![Message::user(baseline_prompt(mode, sample, explanations))],
    };
    match trace
        .complete(backend, &request, CallRole::Baseline, None)
        .await
    {
        Ok(resp) => {
            let label = parse_verdict(&resp.content);
            if label.is_none() {
                trace.record(EventKind::ParseFailure {
                    selector: CallRole::Baseline.code().into(),
                    detail: "no VERDICT line".into(),
                });
            }
            trace.record(EventKind::BaselinePrediction {
                mode: mode.to_string(),
                verdict: label.map(Verdict::from).unwrap_or(Verdict::Abstain),
                backend_calls: 1,
            });
            (label, trace.finish(mode.to_string(), None))
        }
        Err(e) => (None, trace.finish(mode.to_string(), Some(e.into()))),
    }
}

/// One backend call per sample. An unparseable answer or a backend error
/// counts the sample as failed.
pub async fn run_baseline(
    dataset: &str,
    samples: &[Sample],
    mode: BaselineMode,
    config: &RunConfig,
    backend: Arc<dyn ChatBackend>,
    explanations: Option<&Explanations>,
) -> Result<BaselineRun, EvalError> {
    config.validate()?;
    let golds = golds(samples)?;
    let empty = Explanations::default();
    let explanations = explanations.unwrap_or(&empty);
    let per_sample: Vec<&[(AgentId, String)]> = samples
        .iter()
        .map(|s| match mode {
            BaselineMode::ExplanationAugmented => {
                explanations
                    .for_sample(&s.id)
                    .map_err(|agent| EvalError::MissingTraces {
                        sample_id: s.id.clone(),
                        agent,
                    })
            }
            _ => Ok(&[][..]),
        })
        .collect::<Result<_, _>>()?;

    let results: Vec<(Option<Label>, PipelineTrace)> = stream::iter(samples.iter().zip(per_sample))
        .map(|(s, ex)| baseline_sample(mode, s, ex, config, &*backend))
        .buffered(config.max_parallel_samples)
        .collect()
        .await;
    let items: Vec<Scored<'_>> = results
        .iter()
        .zip(&golds)
        .map(|((prediction, trace), &gold)| Scored {
            gold,
            prediction: *prediction,
            refined: false,
            trace,
        })
        .collect();
    let report = MetricsReport::from_scored(dataset, mode.as_str(), &items);
    let (predictions, traces) = results.into_iter().unzip();
    Ok(BaselineRun {
        report,
        predictions,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockBackend, MockScript};
    use crate::data::{synthetic, DatasetName};
    use crate::eval::scripts::{gold_script, ScriptPlan};

    fn fixture(n: usize) -> Vec<Sample> {
        synthetic(DatasetName::SemEval2018, 3)
            .into_iter()
            .take(n)
            .collect()
    }

    fn mock(samples: &[Sample], plan: ScriptPlan) -> Arc<dyn ChatBackend> {
        Arc::new(MockBackend::new(gold_script(samples, &plan).0))
    }

    #[tokio::test]
    async fn agreeing_fixture_scores_perfectly_with_seven_calls() {
        let samples = fixture(8);
        let run = run_benchmark(
            "x",
            &samples,
            &RunConfig::default(),
            mock(&samples, ScriptPlan::agreeing()),
        )
        .await
        .unwrap();
        let r = &run.report;
        assert_eq!((r.accuracy, r.macro_f1, r.failed_samples), (1.0, 1.0, 0));
        assert_eq!(r.mean_backend_calls, 7.0);
        assert_eq!(r.method, "full");
        let wall: Vec<f64> = run
            .outcomes
            .iter()
            .map(|o| o.trace.wall_time_ms / 1000.0)
            .collect();
        let mean = wall.iter().sum::<f64>() / wall.len() as f64;
        assert!((r.latency.mean - mean).abs() <= 1e-6 * mean.abs().max(1e-12));
    }

    #[tokio::test]
    async fn refinement_on_every_sample() {
        let samples = fixture(6);
        let run = run_benchmark(
            "x",
            &samples,
            &RunConfig::default(),
            mock(&samples, ScriptPlan::flipping()),
        )
        .await
        .unwrap();
        assert_eq!(run.report.mean_backend_calls, 10.0);
        assert_eq!(run.report.refined_decisions, 6);
        assert_eq!(run.report.accuracy, 1.0);
    }

    #[tokio::test]
    async fn failed_sample_is_excluded() {
        let samples = fixture(5);
        let (script, _) = gold_script(&samples, &ScriptPlan::agreeing());
        let script = script.respond_for(&samples[2].id, "SA:2", Vec::<String>::new());
        let run = run_benchmark(
            "x",
            &samples,
            &RunConfig::default(),
            Arc::new(MockBackend::new(script)),
        )
        .await
        .unwrap();
        assert_eq!((run.report.failed_samples, run.report.scored), (1, 4));
        assert_eq!(run.report.accuracy, 1.0);
    }

    #[tokio::test]
    async fn unlabeled_samples_are_rejected() {
        let mut samples = fixture(2);
        samples[1].gold = None;
        let err = run_benchmark(
            "x",
            &samples,
            &RunConfig::default(),
            mock(&samples, ScriptPlan::agreeing()),
        )
        .await
        .unwrap_err();
        assert_eq!(err, EvalError::MissingGold(samples[1].id.clone()));
    }

    #[tokio::test]
    async fn ablation_runs_five_variants_in_order() {
        let samples = fixture(10);
        let plan = ScriptPlan {
            flip_rate: 0.3,
            dissent_rate: 0.3,
            ..ScriptPlan::default()
        };
        let samples_ref = &samples;
        let run = run_ablation("x", &samples, &RunConfig::default(), &|_| {
            mock(samples_ref, plan)
        })
        .await
        .unwrap();
        let names: Vec<&str> = run
            .report
            .variants
            .iter()
            .map(|r| r.method.as_str())
            .collect();
        assert_eq!(names, ["full", "-CA", "-SA", "-RA", "-REAgent"]);
        let no_re = &run.runs[4];
        assert_eq!(no_re.report.refined_decisions, 0);
        for o in &no_re.outcomes {
            assert_eq!(o.decision().unwrap().stage, Stage::Initial);
            assert_eq!(o.trace.calls_with_role(CallRole::Evaluator), 0);
        }
        let (_, scenarios) = gold_script(&samples, &plan);
        let full = &run.runs[0];
        for (i, s) in samples.iter().enumerate() {
            if scenarios[&s.id] == crate::eval::scripts::Scenario::Flip {
                assert_ne!(
                    full.outcomes[i].decision().unwrap().label,
                    no_re.outcomes[i].decision().unwrap().label
                );
            }
        }
    }

    #[tokio::test]
    async fn io_baseline_makes_one_call_per_sample() {
        let samples = fixture(9);
        let run = run_baseline(
            "x",
            &samples,
            BaselineMode::Io,
            &RunConfig::default(),
            mock(&samples, ScriptPlan::agreeing()),
            None,
        )
        .await
        .unwrap();
        assert_eq!(run.report.total_backend_calls, 9);
        assert_eq!(run.report.mean_backend_calls, 1.0);
        assert_eq!(run.report.accuracy, 1.0);
        for t in &run.traces {
            assert_eq!(t.attributed_backend_calls(), t.total_backend_calls);
        }
    }

    #[tokio::test]
    async fn explanation_baseline_needs_traces() {
        let samples = fixture(3);
        let backend = mock(&samples, ScriptPlan::agreeing());
        let err = run_baseline(
            "x",
            &samples,
            BaselineMode::ExplanationAugmented,
            &RunConfig::default(),
            backend.clone(),
            None,
        )
        .await
        .unwrap_err();
        assert!(matches!(err, EvalError::MissingTraces { agent: None, .. }));

        let bench = run_benchmark("x", &samples, &RunConfig::default(), backend)
            .await
            .unwrap();
        let ex = Explanations::from_traces(bench.outcomes.iter().map(|o| &o.trace));
        let script = MockScript::default().respond("BASELINE", ["VERDICT: IRONIC"]);
        let run = run_baseline(
            "x",
            &samples,
            BaselineMode::ExplanationAugmented,
            &RunConfig::default(),
            Arc::new(MockBackend::new(script)),
            Some(&ex),
        )
        .await
        .unwrap();
        assert_eq!(run.report.total_backend_calls, 3);
        assert_eq!(run.report.method, "explanation-augmented");
    }

    #[tokio::test]
    async fn unparseable_baseline_answer_fails_the_sample() {
        let samples = fixture(2);
        let script = MockScript::default().respond("BASELINE", ["I cannot tell."]);
        let run = run_baseline(
            "x",
            &samples,
            BaselineMode::Cot,
            &RunConfig::default(),
            Arc::new(MockBackend::new(script)),
            None,
        )
        .await
        .unwrap();
        assert_eq!(run.report.failed_samples, 2);
        assert_eq!(run.predictions, [None, None]);
    }

    #[test]
    fn variant_names() {
        let c = RunConfig::default();
        assert_eq!(variant_name(&c), "full");
        assert_eq!(
            variant_name(
                &c.clone()
                    .without_agent(AgentId::Semantic)
                    .without_refinement()
            ),
            "-SA-REAgent"
        );
    }
}
