//! Command-line front end. The `irony` binary only calls [`main`].
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 backend error.
//! Tables go to standard output; JSON goes to files under `--out-dir`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::backend::{
    BackendError, BackendMode, ChatBackend, HttpBackend, HttpSearchProvider, MockBackend,
    MockScript, RecordingBackend, ReplayBackend, ReplayStore, ScriptedSearch, SearchProvider,
    API_KEY_ENV,
};
use crate::config::{self, ConfigError, RecordSource, Settings};
use crate::data::{self, DataError, DatasetStats};
use crate::domain::{render_label, Sample};
use crate::error::PipelineError;
use crate::eval::scripts::gold_script;
use crate::eval::{
    render_ablation_table, render_results_table, run_ablation, run_baseline, run_benchmark_with,
    BaselineMode, EvalError, Explanations, ReportDocument,
};
use crate::orchestrator::{read_traces, Pipeline};
use crate::trace::PipelineTrace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "irony",
    version,
    about = "Collaborative multi-agent irony detection"
)]
pub struct Cli {
    /// TOML settings file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Backend mode (key: backend)
    #[arg(long, global = true, value_parser = ["live", "record", "replay", "mock"])]
    pub backend: Option<String>,
    /// Output directory for reports, traces and the replay store (key: out_dir)
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Override any settings key, e.g. --set refinement.enabled=false.
    /// Give all --set flags on the same side of the subcommand name.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Log progress to standard error
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one text
    Classify(ClassifyArgs),
    /// Run the pipeline or a baseline over a dataset and score it
    Bench(BenchArgs),
    /// Run the ablation variants over a dataset
    Ablate(DatasetArgs),
    /// Render saved report JSON files as a table
    Report(ReportArgs),
    /// Check that a replay store answers every request of a dataset run
    ReplayVerify(ReplayVerifyArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Text to classify
    pub text: Option<String>,
    /// Read the text from a file instead
    #[arg(long, value_name = "PATH", conflicts_with = "text")]
    pub file: Option<PathBuf>,
    /// Preceding dialogue turn, oldest first (repeatable)
    #[arg(long = "context", value_name = "TURN")]
    pub context: Vec<String>,
    /// Sample id used in traces and call tags
    #[arg(long, default_value = "input")]
    pub id: String,
    /// Write the execution trace as JSON to this path
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DatasetArgs {
    /// iac-v1, iac-v2, mustard, semeval2018 or custom (key: dataset.name)
    #[arg(long, value_name = "NAME")]
    pub dataset: Option<String>,
    /// Dataset file; defaults to the bundled fixture (key: dataset.path)
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// canonical-jsonl or csv (key: dataset.format)
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<String>,
    /// Use only the first N samples (key: dataset.limit)
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// The collaborative pipeline
    Pipeline,
    Io,
    Cot,
    /// Baseline prompt augmented with round-1 explanations from saved traces
    Explain,
}

impl Mode {
    fn baseline(self) -> Option<BaselineMode> {
        match self {
            Mode::Pipeline => None,
            Mode::Io => Some(BaselineMode::Io),
            Mode::Cot => Some(BaselineMode::Cot),
            Mode::Explain => Some(BaselineMode::ExplanationAugmented),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(long, value_enum, default_value_t = Mode::Pipeline)]
    pub mode: Mode,
    /// Trace directory of an earlier pipeline run (explain mode)
    #[arg(long, value_name = "DIR")]
    pub traces_from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json or ablation.json files
    #[arg(required = true, value_name = "PATH")]
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayVerifyArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Replay store to check (key: replay.store)
    #[arg(long, value_name = "PATH")]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Pipeline)]
    pub mode: Mode,
    /// Trace directory of an earlier pipeline run (explain mode)
    #[arg(long, value_name = "DIR")]
    pub traces_from: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) | BackendError::InvalidRequest(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend(b) => b.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pipeline(p) => p.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{}: {e}", path.display()))
}

/// Process environment lookup.
pub fn process_env(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

/// Entry point for the binary: parses `std::env::args`, runs, returns the
/// exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let filter = if cli.verbose { "info" } else { "warn" };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(filter)),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(cli, &process_env, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs a parsed command. `env` supplies environment variables.
pub fn run(
    cli: Cli,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match execute(cli, env, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs.
pub fn run_args<I, T>(
    args: I,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, env, out, err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            }
        }
    }
}

fn settings(
    cli: &Cli,
    dataset: Option<&DatasetArgs>,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Settings, CliError> {
    let mut overrides = cli.set.clone();
    if let Some(b) = &cli.backend {
        overrides.push(format!("backend={b}"));
    }
    if let Some(d) = &cli.out_dir {
        overrides.push(format!("out_dir={}", d.display()));
    }
    if let Some(d) = dataset {
        if let Some(n) = &d.dataset {
            overrides.push(format!("dataset.name={n}"));
        }
        if let Some(p) = &d.data {
            overrides.push(format!("dataset.path={}", p.display()));
        }
        if let Some(f) = &d.format {
            overrides.push(format!("dataset.format={f}"));
        }
        if let Some(n) = d.limit {
            overrides.push(format!("dataset.limit={n}"));
        }
    }
    Ok(config::load(cli.config.as_deref(), env, &overrides)?)
}

fn load_samples(settings: &Settings) -> Result<(Vec<Sample>, PathBuf), CliError> {
    let spec = settings.dataset.spec()?;
    let mut samples = data::load(&spec)?;
    if let Some(n) = settings.dataset.limit {
        samples.truncate(n);
    }
    Ok((samples, spec.path))
}

/// Mock and replay runs use a paused clock so recorded latencies replay
/// exactly; live and record runs use real time.
fn runtime(settings: &Settings) -> Result<tokio::runtime::Runtime, CliError> {
    let deterministic = matches!(
        settings.run.backend_mode,
        BackendMode::Mock | BackendMode::Replay
    ) && settings.search.endpoint.is_none();
    let built = if deterministic {
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .start_paused(true)
            .build()
    } else {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
    };
    built.map_err(|e| CliError::Config(format!("cannot start runtime: {e}")))
}

/// Builds backends; mock backends are rebuilt per call so each run starts
/// with fresh script cursors.
struct Backends {
    mode: BackendMode,
    mock_script: Option<MockScript>,
    live: Option<Arc<dyn ChatBackend>>,
    store: Option<Arc<ReplayStore>>,
    simulate_latency: bool,
}

impl Backends {
    fn new(
        settings: &Settings,
        samples: &[Sample],
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Backends, CliError> {
        let mode = settings.run.backend_mode;
        let needs_mock = mode == BackendMode::Mock
            || (mode == BackendMode::Record && settings.record_source == RecordSource::Mock);
        let needs_live = mode == BackendMode::Live
            || (mode == BackendMode::Record && settings.record_source == RecordSource::Live);
        let mock_script = if needs_mock {
            Some(match &settings.mock.script {
                Some(path) => MockScript::from_path(path)?,
                None => gold_script(samples, &settings.mock.plan).0,
            })
        } else {
            None
        };
        let live = if needs_live {
            let config = settings.http.to_http_config(env(API_KEY_ENV))?;
            Some(Arc::new(HttpBackend::new(config)?) as Arc<dyn ChatBackend>)
        } else {
            None
        };
        let store = match mode {
            BackendMode::Record => Some(Arc::new(ReplayStore::open(settings.replay_store_path())?)),
            BackendMode::Replay => Some(Arc::new(ReplayStore::load(settings.replay_store_path())?)),
            _ => None,
        };
        Ok(Backends {
            mode,
            mock_script,
            live,
            store,
            simulate_latency: settings.replay_simulate_latency,
        })
    }

    fn make(&self) -> Arc<dyn ChatBackend> {
        let source = || -> Arc<dyn ChatBackend> {
            match (&self.mock_script, &self.live) {
                (Some(script), _) => Arc::new(MockBackend::new(script.clone())),
                (None, Some(live)) => live.clone(),
                (None, None) => unreachable!("backend source resolved in Backends::new"),
            }
        };
        match self.mode {
            BackendMode::Mock | BackendMode::Live => source(),
            BackendMode::Record => Arc::new(RecordingBackend::new(
                source(),
                self.store.clone().expect("store"),
            )),
            BackendMode::Replay => Arc::new(
                ReplayBackend::new(self.store.clone().expect("store"))
                    .with_simulated_latency(self.simulate_latency),
            ),
        }
    }
}

fn search_provider(settings: &Settings) -> Result<Option<Arc<dyn SearchProvider>>, CliError> {
    if !settings.run.search_enabled {
        return Ok(None);
    }
    if let Some(path) = &settings.search.script {
        return Ok(Some(Arc::new(ScriptedSearch::from_path(path)?)));
    }
    Ok(settings
        .search
        .endpoint
        .as_ref()
        .map(|e| Arc::new(HttpSearchProvider::new(e.clone())) as Arc<dyn SearchProvider>))
}

fn pipeline(settings: &Settings, backend: Arc<dyn ChatBackend>) -> Result<Pipeline, CliError> {
    let p = Pipeline::new(settings.run.clone(), backend)?;
    Ok(match search_provider(settings)? {
        Some(s) => p.with_search(s),
        None => p,
    })
}

fn write_json(path: &Path, json: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, json).map_err(io_err(path))
}

/// Removes trace files left by an earlier run so the directory reflects
/// only this one.
fn reset_trace_dir(dir: &Path) -> Result<(), CliError> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_trace = path.extension().is_some_and(|x| x == "json")
            && path.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                n.len() > 6 && n[..5].bytes().all(|b| b.is_ascii_digit()) && &n[5..6] == "-"
            });
        if is_trace {
            std::fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

fn save_traces(dir: &Path, traces: &[PipelineTrace]) -> Result<(), CliError> {
    reset_trace_dir(dir)?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, t) in traces.iter().enumerate() {
        let stem: String = t
            .sample_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let json = serde_json::to_string_pretty(t).expect("trace serializes") + "\n";
        write_json(&dir.join(format!("{i:05}-{stem}.json")), &json)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    mode: &'a str,
    dataset: &'a str,
    dataset_path: &'a Path,
    dataset_stats: DatasetStats,
    template_version: String,
    settings: &'a Settings,
    created_at: chrono::DateTime<chrono::Utc>,
}

fn execute(
    cli: Cli,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    match &cli.command {
        Command::Classify(args) => classify(&cli, args, env, out),
        Command::Bench(args) => bench(&cli, args, env, out, err),
        Command::Ablate(args) => ablate(&cli, args, env, out, err),
        Command::Report(args) => report(args, out),
        Command::ReplayVerify(args) => replay_verify(&cli, args, env, out),
    }
}

fn classify(
    cli: &Cli,
    args: &ClassifyArgs,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let settings = settings(cli, None, env)?;
    let text = match (&args.text, &args.file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(io_err(path))?,
        (None, None) => return Err(CliError::Config("give a TEXT argument or --file".into())),
    };
    let sample = Sample::new(args.id.clone(), text.trim(), args.context.clone(), None)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let backends = Backends::new(&settings, std::slice::from_ref(&sample), env)?;
    let pipeline = pipeline(&settings, backends.make())?;
    let outcome = runtime(&settings)?.block_on(pipeline.run_sample(&sample));
    if let Some(path) = &args.trace {
        let json = serde_json::to_string_pretty(&outcome.trace).expect("trace serializes") + "\n";
        write_json(path, &json)?;
    }
    let decision = outcome.result?;
    let w = |e: std::io::Error| CliError::Config(format!("stdout: {e}"));
    writeln!(out, "Label: {}", render_label(decision.label)).map_err(w)?;
    writeln!(out, "Method: {:?}", decision.method).map_err(w)?;
    writeln!(out, "Stage: {:?}", decision.stage).map_err(w)?;
    writeln!(out, "Backend calls: {}", outcome.trace.total_backend_calls).map_err(w)?;
    writeln!(out, "Justification:\n{}", decision.justification.trim()).map_err(w)?;
    if let Some(path) = &args.trace {
        writeln!(out, "Trace: {}", path.display()).map_err(w)?;
    }
    Ok(EXIT_OK)
}

fn explanations(settings: &Settings, traces_from: Option<&Path>) -> Result<Explanations, CliError> {
    let dir = traces_from
        .map(Path::to_path_buf)
        .unwrap_or_else(|| settings.out_dir.join("traces"));
    let traces = read_traces(&dir).map_err(io_err(&dir))?;
    Ok(Explanations::from_traces(&traces))
}

struct BenchOutput {
    report: crate::eval::MetricsReport,
    traces: Vec<PipelineTrace>,
    template_version: String,
}

fn run_mode(
    settings: &Settings,
    backends: &Backends,
    mode: Mode,
    traces_from: Option<&Path>,
    samples: &[Sample],
) -> Result<BenchOutput, CliError> {
    let dataset = settings.dataset.name.title();
    let rt = runtime(settings)?;
    match mode.baseline() {
        None => {
            let pipeline = pipeline(settings, backends.make())?;
            let run = rt.block_on(run_benchmark_with(&pipeline, dataset, samples))?;
            Ok(BenchOutput {
                report: run.report,
                traces: run.outcomes.into_iter().map(|o| o.trace).collect(),
                template_version: pipeline.template_version(),
            })
        }
        Some(b) => {
            let ex = match b {
                BaselineMode::ExplanationAugmented => Some(explanations(settings, traces_from)?),
                _ => None,
            };
            let run = rt.block_on(run_baseline(
                dataset,
                samples,
                b,
                &settings.run,
                backends.make(),
                ex.as_ref(),
            ))?;
            Ok(BenchOutput {
                report: run.report,
                traces: run.traces,
                template_version: b.to_string(),
            })
        }
    }
}

fn bench(
    cli: &Cli,
    args: &BenchArgs,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let settings = settings(cli, Some(&args.dataset), env)?;
    let (samples, path) = load_samples(&settings)?;
    let backends = Backends::new(&settings, &samples, env)?;
    let result = run_mode(
        &settings,
        &backends,
        args.mode,
        args.traces_from.as_deref(),
        &samples,
    )?;

    let dir = &settings.out_dir;
    // Explanation runs read the pipeline traces; baselines keep their outputs apart.
    let suffix = match args.mode.baseline() {
        None => String::new(),
        Some(b) => format!("-{}", b.as_str()),
    };
    save_traces(&dir.join(format!("traces{suffix}")), &result.traces)?;
    let doc = ReportDocument::Benchmark {
        reports: vec![result.report.clone()],
    };
    let report_path = dir.join(format!("report{suffix}.json"));
    write_json(&report_path, &doc.to_json())?;
    let manifest = Manifest {
        command: "bench",
        mode: mode_name(args.mode),
        dataset: settings.dataset.name.as_str(),
        dataset_path: &path,
        dataset_stats: data::summarize(&samples),
        template_version: result.template_version,
        settings: &settings,
        created_at: chrono::Utc::now(),
    };
    write_json(
        &dir.join(format!("manifest{suffix}.json")),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;

    let _ = write!(
        out,
        "{}",
        render_results_table(std::slice::from_ref(&result.report))
    );
    let r = &result.report;
    let _ = writeln!(
        err,
        "{} samples, {} failed, {:.2} calls/sample, latency mean {:.3}s p50 {:.3}s p95 {:.3}s; wrote {}",
        r.samples,
        r.failed_samples,
        r.mean_backend_calls,
        r.latency.mean,
        r.latency.p50,
        r.latency.p95,
        report_path.display()
    );
    Ok(EXIT_OK)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Pipeline => "pipeline",
        Mode::Io => "io",
        Mode::Cot => "cot",
        Mode::Explain => "explain",
    }
}

fn ablate(
    cli: &Cli,
    args: &DatasetArgs,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let settings = settings(cli, Some(args), env)?;
    let (samples, _) = load_samples(&settings)?;
    let backends = Backends::new(&settings, &samples, env)?;
    if settings.run.search_enabled {
        let _ = writeln!(err, "note: ablation runs without external search");
    }
    let rt = runtime(&settings)?;
    let run = rt.block_on(run_ablation(
        settings.dataset.name.title(),
        &samples,
        &settings.run,
        &|_| backends.make(),
    ))?;
    let dir = &settings.out_dir;
    for r in &run.runs {
        let traces: Vec<PipelineTrace> = r.outcomes.iter().map(|o| o.trace.clone()).collect();
        save_traces(&dir.join("ablation-traces").join(&r.report.method), &traces)?;
    }
    let doc = ReportDocument::Ablation(run.report);
    write_json(&dir.join("ablation.json"), &doc.to_json())?;
    if let ReportDocument::Ablation(a) = &doc {
        let _ = write!(out, "{}", render_ablation_table(a));
    }
    let _ = writeln!(err, "wrote {}", dir.join("ablation.json").display());
    Ok(EXIT_OK)
}

fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut merged = Vec::new();
    let mut ablations = Vec::new();
    for path in &args.paths {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let doc: ReportDocument = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: not a saved report: {e}", path.display()))
        })?;
        match doc {
            ReportDocument::Benchmark { reports } => merged.extend(reports),
            ReportDocument::Ablation(a) => ablations.push(a),
        }
    }
    if !merged.is_empty() {
        let _ = write!(out, "{}", render_results_table(&merged));
    }
    for a in &ablations {
        if !merged.is_empty() {
            let _ = writeln!(out);
        }
        let _ = write!(out, "{}", render_ablation_table(a));
    }
    Ok(EXIT_OK)
}

fn replay_verify(
    cli: &Cli,
    args: &ReplayVerifyArgs,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut settings = settings(cli, Some(&args.dataset), env)?;
    settings.run.backend_mode = BackendMode::Replay;
    settings.replay_simulate_latency = false;
    if let Some(store) = &args.store {
        settings.replay_store = Some(store.clone());
    }
    let (samples, _) = load_samples(&settings)?;
    let backends = Backends::new(&settings, &samples, env)?;
    let result = run_mode(
        &settings,
        &backends,
        args.mode,
        args.traces_from.as_deref(),
        &samples,
    )?;

    let mut misses = Vec::new();
    let mut other = Vec::new();
    for t in &result.traces {
        match &t.failure {
            Some(PipelineError::Backend(BackendError::ReplayMiss { digest })) => {
                misses.push((t.sample_id.as_str(), digest.as_str()))
            }
            Some(e) => other.push((t.sample_id.as_str(), e.to_string())),
            None => {}
        }
    }
    let calls: u64 = result
        .traces
        .iter()
        .map(|t| u64::from(t.total_backend_calls))
        .sum();
    let store = settings.replay_store_path();
    if misses.is_empty() && other.is_empty() {
        let _ = writeln!(
            out,
            "ok: {} covers {} samples ({} requests)",
            store.display(),
            samples.len(),
            calls
        );
        return Ok(EXIT_OK);
    }
    for (id, digest) in &misses {
        let _ = writeln!(out, "missing: {digest} (sample {id})");
    }
    for (id, e) in &other {
        let _ = writeln!(out, "failed: sample {id}: {e}");
    }
    Err(CliError::Backend(format!(
        "{} does not cover the run: {} sample(s) hit a replay miss, {} failed otherwise",
        store.display(),
        misses.len(),
        other.len()
    )))
}
