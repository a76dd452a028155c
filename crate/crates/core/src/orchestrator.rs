//! Per-sample pipeline and batch execution.
//!
//! Round 1 runs every enabled agent independently; round 2 shows each agent
//! its peers' round-1 judgments. The round-2 judgments are aggregated into a
//! preliminary decision, which the evaluator may send back for one round of
//! feedback-guided refinement before a final aggregation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::future::join_all;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::agents::{AgentRun, AgentRunner, PromptBuilder, RoundContext, TemplateSet};
use crate::backend::{BackendMode, ChatBackend, NullSearch, SearchProvider, DEFAULT_MODEL};
use crate::decision::{AggregationInput, DecisionMaker};
use crate::domain::{AgentId, Decision, Judgment, Round, Sample};
use crate::error::PipelineError;
use crate::refine::Evaluator;
use crate::trace::{PipelineStage, PipelineTrace, TraceRecorder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub enabled_agents: BTreeSet<AgentId>,
    pub refinement_enabled: bool,
    pub search_enabled: bool,
    pub max_parallel_samples: usize,
    pub model: String,
    pub temperature: f64,
    pub llm_justification: bool,
    pub search_max_documents: usize,
    pub backend_mode: BackendMode,
    pub template_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            enabled_agents: AgentId::ALL.into_iter().collect(),
            refinement_enabled: true,
            search_enabled: false,
            max_parallel_samples: 4,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            llm_justification: false,
            search_max_documents: 5,
            backend_mode: BackendMode::Mock,
            template_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.enabled_agents.is_empty() {
            return Err(PipelineError::Config(
                "at least one agent must be enabled".into(),
            ));
        }
        if self.max_parallel_samples == 0 {
            return Err(PipelineError::Config(
                "max_parallel_samples must be positive".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(PipelineError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn without_agent(mut self, agent: AgentId) -> RunConfig {
        self.enabled_agents.remove(&agent);
        self
    }

    pub fn without_refinement(mut self) -> RunConfig {
        self.refinement_enabled = false;
        self
    }
}

/// One sample's result. Failed samples keep their partial trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub result: Result<Decision, PipelineError>,
    pub trace: PipelineTrace,
}

impl SampleOutcome {
    pub fn decision(&self) -> Option<&Decision> {
        self.result.as_ref().ok()
    }
}

pub struct Pipeline {
    backend: Arc<dyn ChatBackend>,
    search: Arc<dyn SearchProvider>,
    prompts: PromptBuilder,
    config: RunConfig,
}

impl Pipeline {
    /// Loads templates from `config.template_dir` (or the built-in set) and
    /// checks them against the enabled agents.
    pub fn new(
        config: RunConfig,
        backend: Arc<dyn ChatBackend>,
    ) -> Result<Pipeline, PipelineError> {
        let templates = match &config.template_dir {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::builtin(),
        };
        Pipeline::with_templates(config, backend, templates)
    }

    pub fn with_templates(
        config: RunConfig,
        backend: Arc<dyn ChatBackend>,
        templates: TemplateSet,
    ) -> Result<Pipeline, PipelineError> {
        config.validate()?;
        let agents: Vec<AgentId> = config.enabled_agents.iter().copied().collect();
        templates.validate(&agents)?;
        let prompts = PromptBuilder::new(templates, config.model.clone())
            .with_temperature(config.temperature);
        Ok(Pipeline {
            backend,
            search: Arc::new(NullSearch),
            prompts,
            config,
        })
    }

    pub fn with_search(mut self, provider: Arc<dyn SearchProvider>) -> Pipeline {
        self.search = provider;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn template_version(&self) -> String {
        self.prompts.templates().version()
    }

    pub async fn run_sample(&self, sample: &Sample) -> SampleOutcome {
        let trace = TraceRecorder::new(&sample.id);
        let result = self.execute(sample, &trace).await;
        if let Err(err) = &result {
            tracing::warn!(sample = %sample.id, %err, "sample failed");
        }
        let failure = result.as_ref().err().cloned();
        SampleOutcome {
            sample_id: sample.id.clone(),
            result,
            trace: trace.finish(self.template_version(), failure),
        }
    }

    /// Runs samples with at most `max_parallel_samples` in flight. Output
    /// order follows input order.
    pub async fn run_batch(&self, samples: &[Sample]) -> Vec<SampleOutcome> {
        stream::iter(samples)
            .map(|s| self.run_sample(s))
            .buffered(self.config.max_parallel_samples)
            .collect()
            .await
    }

    async fn round(
        &self,
        sample: &Sample,
        trace: &TraceRecorder,
        contexts: Vec<(AgentId, RoundContext)>,
    ) -> Result<Vec<AgentRun>, PipelineError> {
        let runner = AgentRunner {
            backend: &*self.backend,
            search: &*self.search,
            prompts: &self.prompts,
            search_limit: self.config.search_max_documents,
        };
        let runner = &runner;
        let runs = join_all(
            contexts
                .iter()
                .map(|(agent, ctx)| runner.run(*agent, sample, ctx, trace)),
        )
        .await;
        runs.into_iter().collect()
    }

    async fn execute(
        &self,
        sample: &Sample,
        trace: &TraceRecorder,
    ) -> Result<Decision, PipelineError> {
        let agents: Vec<AgentId> = self.config.enabled_agents.iter().copied().collect();
        let peers = |judgments: &[Judgment], me: AgentId| -> Vec<Judgment> {
            judgments
                .iter()
                .filter(|j| j.agent != me)
                .cloned()
                .collect()
        };

        trace.stage(PipelineStage::IndependentRound);
        let contexts = agents
            .iter()
            .map(|&a| {
                let ctx = RoundContext::independent();
                let ctx = if self.config.search_enabled && a == AgentId::Context {
                    ctx.allowing_search()
                } else {
                    ctx
                };
                (a, ctx)
            })
            .collect();
        let round1 = self.round(sample, trace, contexts).await?;
        // Background knowledge found in round 1 stays with the Context Agent.
        let summary = round1.iter().find_map(|r| r.search_summary.clone());
        let round1: Vec<Judgment> = round1.into_iter().map(|r| r.judgment).collect();
        let with_summary = |a: AgentId, ctx: RoundContext| {
            if a == AgentId::Context {
                ctx.with_search_summary(summary.clone())
            } else {
                ctx
            }
        };

        trace.stage(PipelineStage::CollaborativeRound);
        let contexts = agents
            .iter()
            .map(|&a| {
                (
                    a,
                    with_summary(a, RoundContext::collaborative(peers(&round1, a))),
                )
            })
            .collect();
        let round2: Vec<Judgment> = self
            .round(sample, trace, contexts)
            .await?
            .into_iter()
            .map(|r| r.judgment)
            .collect();

        let maker = DecisionMaker {
            backend: &*self.backend,
            model: &self.config.model,
            temperature: self.config.temperature,
            llm_justification: self.config.llm_justification,
        };
        trace.stage(PipelineStage::InitialDecision);
        let input = aggregation_input(round2.clone())?;
        let initial = maker.aggregate(&input, sample, trace).await?;
        if !self.config.refinement_enabled {
            return Ok(initial);
        }

        trace.stage(PipelineStage::Evaluation);
        let evaluator = Evaluator {
            backend: &*self.backend,
            model: &self.config.model,
            temperature: self.config.temperature,
        };
        let evaluated = evaluator.evaluate(sample, &initial, &round2, trace).await?;
        let Some(feedback) = evaluated.evaluation.feedback().cloned() else {
            return Ok(initial);
        };

        trace.stage(PipelineStage::RefinementRound);
        let contexts = agents
            .iter()
            .map(|&a| {
                let ctx = RoundContext::refinement(peers(&round2, a), feedback.for_agent(a));
                (a, with_summary(a, ctx))
            })
            .collect();
        let round3: Vec<Judgment> = self
            .round(sample, trace, contexts)
            .await?
            .into_iter()
            .map(|r| r.judgment)
            .collect();

        trace.stage(PipelineStage::FinalDecision);
        let input = aggregation_input(round3)?;
        Ok(maker.aggregate(&input, sample, trace).await?)
    }
}

fn aggregation_input(judgments: Vec<Judgment>) -> Result<AggregationInput, PipelineError> {
    AggregationInput::new(judgments, true).map_err(|e| PipelineError::Config(e.to_string()))
}

/// Deciding round of a finished trace: 3 when refinement ran.
pub fn deciding_round(trace: &PipelineTrace) -> Round {
    if trace.stages().contains(&PipelineStage::RefinementRound) {
        Round::REFINEMENT
    } else {
        Round::COLLABORATIVE
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one pretty-printed JSON trace per sample into `dir`, numbered by
/// position so that ids with clashing sanitized forms stay distinct.
pub fn write_traces(dir: &Path, outcomes: &[SampleOutcome]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.iter().enumerate() {
        let path = dir.join(format!("{:05}-{}.json", i, file_stem(&outcome.sample_id)));
        let json = serde_json::to_string_pretty(&outcome.trace).expect("trace serializes");
        std::fs::write(&path, json + "\n")?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_traces(dir: &Path) -> std::io::Result<Vec<PipelineTrace>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    entries
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}: {e}", p.display()),
                )
            })
        })
        .collect()
}
