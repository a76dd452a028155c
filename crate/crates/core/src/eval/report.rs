//! Benchmark reports and their text-table rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{ClassMetrics, ConfusionMatrix};
use crate::domain::Label;
use crate::trace::PipelineTrace;

/// Per-sample latency in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl LatencySummary {
    /// Mean and nearest-rank percentiles; all zero for no samples.
    pub fn from_seconds(values: &[f64]) -> LatencySummary {
        if values.is_empty() {
            return LatencySummary::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |p: f64| {
            let idx = (p * sorted.len() as f64).ceil() as usize;
            sorted[idx.clamp(1, sorted.len()) - 1]
        };
        LatencySummary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p50: rank(0.50),
            p95: rank(0.95),
        }
    }
}

/// One sample as seen by the scorer. `prediction` is `None` for failures.
#[derive(Debug, Clone, Copy)]
pub struct Scored<'a> {
    pub gold: Label,
    pub prediction: Option<Label>,
    pub refined: bool,
    pub trace: &'a PipelineTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    /// Method or ablation variant, e.g. `full`, `-RA`, `io`.
    pub method: String,
    pub samples: usize,
    pub scored: usize,
    pub failed_samples: usize,
    /// Over scored samples; 0 when nothing was scored.
    pub accuracy: f64,
    pub macro_f1: f64,
    pub ironic: ClassMetrics,
    pub non_ironic: ClassMetrics,
    pub confusion: ConfusionMatrix,
    /// Over all samples, failed ones included.
    pub latency: LatencySummary,
    pub mean_backend_calls: f64,
    pub total_backend_calls: u64,
    pub refined_decisions: usize,
}

impl MetricsReport {
    pub fn from_scored(dataset: &str, method: &str, items: &[Scored<'_>]) -> MetricsReport {
        let mut confusion = ConfusionMatrix::default();
        for item in items {
            if let Some(p) = item.prediction {
                confusion.add(p, item.gold);
            }
        }
        let scored = confusion.total() as usize;
        let seconds: Vec<f64> = items
            .iter()
            .map(|i| i.trace.wall_time_ms / 1000.0)
            .collect();
        let total_backend_calls: u64 = items
            .iter()
            .map(|i| u64::from(i.trace.total_backend_calls))
            .sum();
        MetricsReport {
            dataset: dataset.to_string(),
            method: method.to_string(),
            samples: items.len(),
            scored,
            failed_samples: items.len() - scored,
            accuracy: confusion.accuracy().unwrap_or(0.0),
            macro_f1: confusion.macro_f1().unwrap_or(0.0),
            ironic: confusion.class(Label::Ironic),
            non_ironic: confusion.class(Label::NonIronic),
            confusion,
            latency: LatencySummary::from_seconds(&seconds),
            mean_backend_calls: if items.is_empty() {
                0.0
            } else {
                total_backend_calls as f64 / items.len() as f64
            },
            total_backend_calls,
            refined_decisions: items
                .iter()
                .filter(|i| i.refined && i.prediction.is_some())
                .count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub dataset: String,
    /// In run order; the first entry is the full system.
    pub variants: Vec<MetricsReport>,
}

impl AblationReport {
    pub fn variant(&self, name: &str) -> Option<&MetricsReport> {
        self.variants.iter().find(|r| r.method == name)
    }

    /// Macro-F1 difference of each variant against the first one.
    pub fn macro_f1_deltas(&self) -> Vec<(String, f64)> {
        let base = self.variants.first().map(|r| r.macro_f1).unwrap_or(0.0);
        self.variants
            .iter()
            .map(|r| (r.method.clone(), r.macro_f1 - base))
            .collect()
    }
}

/// A saved report file: either plain benchmark reports or an ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportDocument {
    Benchmark { reports: Vec<MetricsReport> },
    Ablation(AblationReport),
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn render(&self) -> String {
        match self {
            ReportDocument::Benchmark { reports } => render_results_table(reports),
            ReportDocument::Ablation(a) => render_ablation_table(a),
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 1 {
            let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

/// Methods as rows, datasets as column pairs (Acc., Ma-F1), with an Avg.
/// pair when more than one dataset is present. Percentages, two decimals.
pub fn render_results_table(reports: &[MetricsReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let with_avg = datasets.len() > 1;
    let mut head = vec!["Method".to_string()];
    let mut sub = vec![String::new()];
    for d in datasets.iter().copied().chain(with_avg.then_some("Avg.")) {
        head.extend([d.to_string(), String::new()]);
        sub.extend(["Acc.".to_string(), "Ma-F1".to_string()]);
    }
    let mut rows = vec![head, sub];
    for m in &methods {
        let mut row = vec![m.to_string()];
        let (mut acc, mut f1, mut n) = (0.0, 0.0, 0);
        for d in &datasets {
            match reports.iter().find(|r| r.method == *m && r.dataset == *d) {
                Some(r) => {
                    row.extend([pct(r.accuracy), pct(r.macro_f1)]);
                    acc += r.accuracy;
                    f1 += r.macro_f1;
                    n += 1;
                }
                None => row.extend(["-".to_string(), "-".to_string()]),
            }
        }
        if with_avg {
            if n == datasets.len() {
                row.extend([pct(acc / n as f64), pct(f1 / n as f64)]);
            } else {
                row.extend(["-".to_string(), "-".to_string()]);
            }
        }
        rows.push(row);
    }
    pad_table(&rows)
}

/// One row per variant with Macro-F1 deltas against the full system.
pub fn render_ablation_table(report: &AblationReport) -> String {
    let mut rows = vec![
        vec![
            "Variant".to_string(),
            report.dataset.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ],
        ["", "Acc.", "Ma-F1", "dMa-F1", "Failed", "Calls", "Refined"]
            .map(String::from)
            .to_vec(),
    ];
    for (r, (_, delta)) in report.variants.iter().zip(report.macro_f1_deltas()) {
        rows.push(vec![
            r.method.clone(),
            pct(r.accuracy),
            pct(r.macro_f1),
            format!("{:+.2}", delta * 100.0),
            r.failed_samples.to_string(),
            format!("{:.2}", r.mean_backend_calls),
            r.refined_decisions.to_string(),
        ]);
    }
    pad_table(&rows)
}
