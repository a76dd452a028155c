//! Scoring, benchmark and ablation runners, and prompting baselines.

mod baseline;
pub mod metrics;
mod report;
mod runner;
pub mod scripts;

pub use baseline::{baseline_prompt, parse_verdict, BaselineMode, Explanations};
pub use metrics::{accuracy, macro_f1, ClassMetrics, ConfusionMatrix, MetricsError};
pub use report::{
    render_ablation_table, render_results_table, AblationReport, LatencySummary, MetricsReport,
    ReportDocument, Scored,
};
pub use runner::{
    ablation_variants, run_ablation, run_baseline, run_benchmark, run_benchmark_with, variant_name,
    AblationRun, BaselineRun, BenchmarkRun, EvalError,
};
