//! Dataset loading into [`Sample`]s, summary statistics, and synthetic
//! size-matched fixtures for the four benchmark corpora.
//!
//! Two on-disk formats are supported. Canonical JSONL has one
//! `{"id", "text", "context"?, "label"?}` object per line. CSV needs a header
//! row and a [`FieldMapping`] naming the text, label, id and context columns.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    IacV1,
    IacV2,
    Mustard,
    #[serde(rename = "semeval2018")]
    SemEval2018,
    Custom,
}

impl DatasetName {
    pub const BENCHMARKS: [DatasetName; 4] = [
        DatasetName::IacV1,
        DatasetName::IacV2,
        DatasetName::Mustard,
        DatasetName::SemEval2018,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::IacV1 => "iac-v1",
            DatasetName::IacV2 => "iac-v2",
            DatasetName::Mustard => "mustard",
            DatasetName::SemEval2018 => "semeval2018",
            DatasetName::Custom => "custom",
        }
    }

    /// Column title used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            DatasetName::IacV1 => "IAC-V1",
            DatasetName::IacV2 => "IAC-V2",
            DatasetName::Mustard => "MuSTARD",
            DatasetName::SemEval2018 => "SemEval-2018",
            DatasetName::Custom => "Custom",
        }
    }

    /// Published size and average length of the benchmark, if it is one.
    pub fn reference_stats(self) -> Option<ReferenceStats> {
        let (size, avg_len, context) = match self {
            DatasetName::IacV1 => (320, 68, false),
            DatasetName::IacV2 => (1042, 43, false),
            DatasetName::Mustard => (784, 14, true),
            DatasetName::SemEval2018 => (183, 14, false),
            DatasetName::Custom => return None,
        };
        Some(ReferenceStats {
            size,
            avg_len,
            context,
        })
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DatasetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iac-v1" | "iacv1" => Ok(DatasetName::IacV1),
            "iac-v2" | "iacv2" => Ok(DatasetName::IacV2),
            "mustard" => Ok(DatasetName::Mustard),
            "semeval2018" | "semeval-2018" => Ok(DatasetName::SemEval2018),
            "custom" => Ok(DatasetName::Custom),
            other => Err(format!("unknown dataset {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceStats {
    pub size: usize,
    pub avg_len: u64,
    pub context: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    CanonicalJsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub text_column: String,
    pub label_column: Option<String>,
    /// Literal mapped to `Ironic`.
    pub positive_label: String,
    /// Literal mapped to `NonIronic`; any other non-empty value is an error.
    pub negative_label: String,
    /// Either a JSON array of turns or one turn per line.
    pub context_column: Option<String>,
    /// Row position (1-based) is used when absent.
    pub id_column: Option<String>,
    pub delimiter: char,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            text_column: "text".into(),
            label_column: Some("label".into()),
            positive_label: "1".into(),
            negative_label: "0".into(),
            context_column: None,
            id_column: None,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: DatasetName,
    pub path: PathBuf,
    pub format: DataFormat,
    #[serde(default)]
    pub mapping: FieldMapping,
}

impl DatasetSpec {
    pub fn jsonl(name: DatasetName, path: impl Into<PathBuf>) -> DatasetSpec {
        DatasetSpec {
            name,
            path: path.into(),
            format: DataFormat::CanonicalJsonl,
            mapping: FieldMapping::default(),
        }
    }

    pub fn csv(name: DatasetName, path: impl Into<PathBuf>, mapping: FieldMapping) -> DatasetSpec {
        DatasetSpec {
            name,
            path: path.into(),
            format: DataFormat::Csv,
            mapping,
        }
    }

    /// Picks the format from the file extension (`.csv` or JSONL otherwise).
    pub fn infer(name: DatasetName, path: impl Into<PathBuf>) -> DatasetSpec {
        let path = path.into();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            DatasetSpec::csv(name, path, FieldMapping::default())
        } else {
            DatasetSpec::jsonl(name, path)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("column {column:?} not in header (have: {})", available.join(", "))]
    MissingColumn {
        column: String,
        available: Vec<String>,
    },
    #[error("{} record(s) with unmappable labels: {}", rows.len(), describe_rows(rows))]
    UnmappableLabels { rows: Vec<(usize, String)> },
    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
}

fn describe_rows(rows: &[(usize, String)]) -> String {
    rows.iter()
        .take(10)
        .map(|(line, value)| format!("line {line} ({value:?})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Accepts the label spellings used by canonical JSONL files.
pub fn label_from_literal(value: &str) -> Option<Label> {
    match value.trim().to_ascii_lowercase().as_str() {
        "ironic" | "sarcastic" | "1" | "true" => Some(Label::Ironic),
        "non_ironic" | "not_ironic" | "non-ironic" | "not_sarcastic" | "0" | "false" => {
            Some(Label::NonIronic)
        }
        _ => None,
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: serde_json::Value,
    text: String,
    #[serde(default)]
    context: Vec<String>,
    #[serde(default)]
    label: Option<serde_json::Value>,
}

fn scalar(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn load(spec: &DatasetSpec) -> Result<Vec<Sample>, DataError> {
    let bytes = std::fs::read(&spec.path).map_err(|e| DataError::Io {
        path: spec.path.clone(),
        message: e.to_string(),
    })?;
    let text = String::from_utf8(bytes).map_err(|e| DataError::Io {
        path: spec.path.clone(),
        message: format!("not valid UTF-8: {e}"),
    })?;
    let records = match spec.format {
        DataFormat::CanonicalJsonl => parse_jsonl(&text)?,
        DataFormat::Csv => parse_csv(&text, &spec.mapping)?,
    };
    let mut seen = HashSet::new();
    for (line, sample) in &records {
        if !seen.insert(sample.id.clone()) {
            return Err(DataError::DuplicateId {
                id: sample.id.clone(),
                line: *line,
            });
        }
    }
    Ok(records.into_iter().map(|(_, s)| s).collect())
}

fn parse_jsonl(text: &str) -> Result<Vec<(usize, Sample)>, DataError> {
    let mut out = Vec::new();
    let mut bad_labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(raw).map_err(|e| DataError::InvalidRecord {
            line,
            message: e.to_string(),
        })?;
        let gold = match &rec.label {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => match label_from_literal(&scalar(v)) {
                Some(l) => Some(l),
                None => {
                    bad_labels.push((line, scalar(v)));
                    continue;
                }
            },
        };
        let sample = Sample::new(scalar(&rec.id), rec.text, rec.context, gold).map_err(|e| {
            DataError::InvalidRecord {
                line,
                message: e.to_string(),
            }
        })?;
        out.push((line, sample));
    }
    if !bad_labels.is_empty() {
        return Err(DataError::UnmappableLabels { rows: bad_labels });
    }
    Ok(out)
}

fn parse_context_cell(cell: &str) -> Vec<String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Vec::new();
    }
    if cell.starts_with('[') {
        if let Ok(turns) = serde_json::from_str::<Vec<String>>(cell) {
            return turns;
        }
    }
    cell.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn parse_csv(text: &str, mapping: &FieldMapping) -> Result<Vec<(usize, Sample)>, DataError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let delimiter = u8::try_from(mapping.delimiter).map_err(|_| DataError::InvalidRecord {
        line: 0,
        message: format!("delimiter {:?} is not a single byte", mapping.delimiter),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::InvalidRecord {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                column: name.to_string(),
                available: headers.clone(),
            })
    };
    let text_idx = column(&mapping.text_column)?;
    let label_idx = mapping.label_column.as_deref().map(column).transpose()?;
    let context_idx = mapping.context_column.as_deref().map(column).transpose()?;
    let id_idx = mapping.id_column.as_deref().map(column).transpose()?;

    let mut out = Vec::new();
    let mut bad_labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::InvalidRecord {
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 2),
            message: e.to_string(),
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 2);
        let get = |idx: usize| record.get(idx).unwrap_or("").to_string();
        let gold = match label_idx {
            None => None,
            Some(idx) => {
                let value = get(idx);
                let v = value.trim();
                if v.is_empty() {
                    None
                } else if v == mapping.positive_label {
                    Some(Label::Ironic)
                } else if v == mapping.negative_label {
                    Some(Label::NonIronic)
                } else {
                    bad_labels.push((line, value));
                    continue;
                }
            }
        };
        let id = id_idx.map(get).unwrap_or_else(|| (i + 1).to_string());
        let context = context_idx
            .map(|c| parse_context_cell(&get(c)))
            .unwrap_or_default();
        let sample = Sample::new(id, get(text_idx), context, gold).map_err(|e| {
            DataError::InvalidRecord {
                line,
                message: e.to_string(),
            }
        })?;
        out.push((line, sample));
    }
    if !bad_labels.is_empty() {
        return Err(DataError::UnmappableLabels { rows: bad_labels });
    }
    Ok(out)
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    context: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

/// Renders samples as canonical JSONL.
pub fn to_jsonl(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        let rec = CanonicalRecord {
            id: &s.id,
            text: &s.text,
            context: &s.context,
            label: s.gold,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, samples: &[Sample]) -> std::io::Result<()> {
    std::fs::write(path, to_jsonl(samples))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub size: usize,
    pub ironic: usize,
    pub non_ironic: usize,
    pub unlabeled: usize,
    pub with_context: usize,
    /// Mean whitespace-token count, rounded to the nearest integer.
    pub avg_length: u64,
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn summarize(samples: &[Sample]) -> DatasetStats {
    let mut stats = DatasetStats {
        size: samples.len(),
        ironic: 0,
        non_ironic: 0,
        unlabeled: 0,
        with_context: 0,
        avg_length: 0,
    };
    let mut tokens = 0usize;
    for s in samples {
        match s.gold {
            Some(Label::Ironic) => stats.ironic += 1,
            Some(Label::NonIronic) => stats.non_ironic += 1,
            None => stats.unlabeled += 1,
        }
        if !s.context.is_empty() {
            stats.with_context += 1;
        }
        tokens += token_count(&s.text);
    }
    if !samples.is_empty() {
        stats.avg_length = (tokens as f64 / samples.len() as f64).round() as u64;
    }
    stats
}

const IRONIC_OPENERS: [&str; 8] = [
    "Oh great,",
    "Wow, just what I needed:",
    "Sure, because",
    "Brilliant,",
    "I just love how",
    "Yeah, right,",
    "Fantastic news:",
    "What a surprise,",
];

const PLAIN_OPENERS: [&str; 8] = [
    "I think",
    "The report says",
    "In my view",
    "According to the article,",
    "Honestly,",
    "It seems that",
    "My point is that",
    "The data shows",
];

const FILLER: [&str; 40] = [
    "the", "debate", "policy", "vote", "senator", "tax", "plan", "weather", "train", "meeting",
    "again", "today", "budget", "argument", "people", "really", "always", "never", "evidence",
    "reform", "school", "city", "price", "service", "game", "team", "coffee", "traffic", "phone",
    "update", "week", "morning", "result", "system", "office", "rules", "law", "market", "night",
    "show",
];

const SPEAKERS: [&str; 6] = ["SHELDON", "LEONARD", "PENNY", "CHANDLER", "MONICA", "JOEY"];

/// Deterministic synthetic corpus shaped like a benchmark: same size, same
/// rounded mean length, dialogue context where the original has it.
/// Labels alternate with a small random jitter so both classes are present.
pub fn synthetic(name: DatasetName, seed: u64) -> Vec<Sample> {
    let stats = name.reference_stats().unwrap_or(ReferenceStats {
        size: 50,
        avg_len: 20,
        context: false,
    });
    synthetic_with(name.as_str(), stats, seed)
}

pub fn synthetic_with(prefix: &str, stats: ReferenceStats, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = stats.avg_len as usize;
    let min_len = 4.min(target.max(1));
    let spread = (target / 2).max(1);
    let mut lengths: Vec<usize> = (0..stats.size)
        .map(|_| {
            let lo = target.saturating_sub(spread).max(min_len);
            rng.gen_range(lo..=target + spread)
        })
        .collect();
    // Nudge lengths until the total matches size * target exactly.
    let want = stats.size * target;
    let mut total: usize = lengths.iter().sum();
    let mut i = 0;
    while total != want && !lengths.is_empty() {
        let k = i % lengths.len();
        if total > want && lengths[k] > min_len {
            lengths[k] -= 1;
            total -= 1;
        } else if total < want {
            lengths[k] += 1;
            total += 1;
        }
        i += 1;
    }

    lengths
        .into_iter()
        .enumerate()
        .map(|(i, len)| {
            let ironic = (i % 2 == 0) ^ rng.gen_bool(0.1);
            let opener = if ironic {
                IRONIC_OPENERS[rng.gen_range(0..IRONIC_OPENERS.len())]
            } else {
                PLAIN_OPENERS[rng.gen_range(0..PLAIN_OPENERS.len())]
            };
            let mut words: Vec<&str> = opener.split_whitespace().collect();
            while words.len() < len {
                words.push(FILLER[rng.gen_range(0..FILLER.len())]);
            }
            words.truncate(len);
            let text = words.join(" ") + if ironic { "!" } else { "." };
            let context = if stats.context {
                (0..rng.gen_range(1..=3))
                    .map(|_| {
                        let speaker = SPEAKERS[rng.gen_range(0..SPEAKERS.len())];
                        let n = rng.gen_range(3..=8);
                        let turn: Vec<&str> = (0..n)
                            .map(|_| FILLER[rng.gen_range(0..FILLER.len())])
                            .collect();
                        format!("{speaker}: {}", turn.join(" "))
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let label = if ironic {
                Label::Ironic
            } else {
                Label::NonIronic
            };
            Sample::new(format!("{prefix}-{:04}", i + 1), text, context, Some(label))
                .expect("synthetic text is non-empty")
        })
        .collect()
}

/// Seed used for the bundled fixture files.
pub const FIXTURE_SEED: u64 = 2024;

/// Directory holding the bundled synthetic fixtures.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(name: DatasetName) -> PathBuf {
    fixtures_dir().join(format!("{}.jsonl", name.as_str()))
}

/// Loads a bundled fixture.
pub fn load_fixture(name: DatasetName) -> Result<Vec<Sample>, DataError> {
    load(&DatasetSpec::jsonl(name, fixture_path(name)))
}

/// Label counts keyed by label, for reports.
pub fn label_counts(samples: &[Sample]) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        if let Some(l) = s.gold {
            *counts.entry(l).or_insert(0) += 1;
        }
    }
    counts
}
