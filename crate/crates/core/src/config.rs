//! Layered run settings: built-in defaults, then a TOML file, then the
//! environment, then command-line `--set key=value` overrides.
//!
//! Keys are flat and dotted (`search.enabled`, `dataset.path`). In the file
//! they may be written either as dotted keys or as tables:
//!
//! ```toml
//! model = "gpt-4o"
//! agents = ["CA", "SA", "RA"]
//!
//! [refinement]
//! enabled = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use toml::Value;

use crate::backend::{HttpConfig, RetryPolicy, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
use crate::data::{DataFormat, DatasetName, DatasetSpec, FieldMapping};
use crate::domain::AgentId;
use crate::eval::scripts::ScriptPlan;
use crate::orchestrator::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key}: expected {expected}, got {got}")]
    WrongType {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("override {0:?} is not of the form key=value")]
    BadOverride(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Str,
    Bool,
    Int,
    Float,
    StrList,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Str => "a string",
            Kind::Bool => "a boolean",
            Kind::Int => "a non-negative integer",
            Kind::Float => "a number",
            Kind::StrList => "a list of strings",
        }
    }
}

/// Every accepted key with its type.
const KEYS: &[(&str, Kind)] = &[
    ("model", Kind::Str),
    ("temperature", Kind::Float),
    ("agents", Kind::StrList),
    ("refinement.enabled", Kind::Bool),
    ("llm_justification", Kind::Bool),
    ("max_parallel_samples", Kind::Int),
    ("templates.dir", Kind::Str),
    ("search.enabled", Kind::Bool),
    ("search.max_documents", Kind::Int),
    ("search.endpoint", Kind::Str),
    ("search.script", Kind::Str),
    ("backend", Kind::Str),
    ("http.base_url", Kind::Str),
    ("http.timeout_secs", Kind::Int),
    ("http.max_retries", Kind::Int),
    ("http.requests_per_minute", Kind::Int),
    ("replay.store", Kind::Str),
    ("replay.simulate_latency", Kind::Bool),
    ("record.source", Kind::Str),
    ("mock.script", Kind::Str),
    ("mock.dissent_rate", Kind::Float),
    ("mock.flip_rate", Kind::Float),
    ("mock.seed", Kind::Int),
    ("mock.latency_ms", Kind::Int),
    ("dataset.name", Kind::Str),
    ("dataset.path", Kind::Str),
    ("dataset.format", Kind::Str),
    ("dataset.text_column", Kind::Str),
    ("dataset.label_column", Kind::Str),
    ("dataset.positive_label", Kind::Str),
    ("dataset.negative_label", Kind::Str),
    ("dataset.context_column", Kind::Str),
    ("dataset.id_column", Kind::Str),
    ("dataset.delimiter", Kind::Str),
    ("dataset.limit", Kind::Int),
    ("out_dir", Kind::Str),
];

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("string {s:?}"),
        other => format!("{} {other}", other.type_str()),
    }
}

fn check(key: &str, value: Value) -> Result<Value, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
    let wrong = |v: &Value| ConfigError::WrongType {
        key: key.to_string(),
        expected: kind.name(),
        got: describe(v),
    };
    match (kind, value) {
        (Kind::Str, v @ Value::String(_)) | (Kind::Bool, v @ Value::Boolean(_)) => Ok(v),
        (Kind::Int, Value::Integer(i)) if i >= 0 => Ok(Value::Integer(i)),
        (Kind::Float, Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Kind::Float, v @ Value::Float(_)) => Ok(v),
        (Kind::StrList, Value::String(s)) => Ok(Value::Array(
            s.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| Value::String(p.to_string()))
                .collect(),
        )),
        (Kind::StrList, Value::Array(items)) if items.iter().all(Value::is_str) => {
            Ok(Value::Array(items))
        }
        (_, v) => Err(wrong(&v)),
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other)),
        }
    }
}

/// Merged key/value view. Later layers overwrite earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layers {
    values: BTreeMap<String, Value>,
}

impl Layers {
    pub fn new() -> Layers {
        Layers::default()
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let value = check(key, value)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn merge_toml(&mut self, text: &str, origin: &Path) -> Result<(), ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::File {
                path: origin.to_path_buf(),
                message: e.message().to_string(),
            })?;
        let mut flat = Vec::new();
        flatten("", table, &mut flat);
        for (k, v) in flat {
            self.set(&k, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        self.merge_toml(&text, path)
    }

    /// `CAF_BASE_URL` sets `http.base_url`. The API key is read only when a
    /// live backend is built and never stored here.
    pub fn merge_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(url) = get(BASE_URL_ENV).filter(|u| !u.trim().is_empty()) {
            self.set("http.base_url", Value::String(url))?;
        }
        Ok(())
    }

    /// Parses `key=value`; the value is read as a TOML literal when it is
    /// one (`true`, `3`, `["CA"]`) and as a bare string otherwise.
    pub fn merge_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        let key = key.trim();
        let raw = raw.trim();
        let parsed = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"));
        let value = match (kind_of(key), parsed) {
            (Some(Kind::Str), Some(v @ Value::String(_))) => v,
            (Some(Kind::Str), _) | (Some(Kind::StrList), None) => Value::String(raw.to_string()),
            (_, Some(v)) => v,
            (_, None) => Value::String(raw.to_string()),
        };
        self.set(key, value)
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(Value::as_str)
    }

    fn bool(&self, key: &str) -> Option<bool> {
        self.values.get(key).and_then(Value::as_bool)
    }

    fn int(&self, key: &str) -> Option<u64> {
        self.values
            .get(key)
            .and_then(Value::as_integer)
            .map(|i| i as u64)
    }

    fn float(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_float)
    }

    fn list(&self, key: &str) -> Option<Vec<String>> {
        self.values.get(key).and_then(Value::as_array).map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(String::from)
                .collect()
        })
    }

    pub fn resolve(&self) -> Result<Settings, ConfigError> {
        Settings::from_layers(self)
    }
}

/// Where a record-mode run gets its responses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HttpSettings {
    pub base_url: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub requests_per_minute: Option<u32>,
}

impl HttpSettings {
    /// Builds the client configuration. A missing or blank key is a
    /// configuration error naming the variable it is read from.
    pub fn to_http_config(&self, api_key: Option<String>) -> Result<HttpConfig, ConfigError> {
        let api_key = api_key.filter(|k| !k.trim().is_empty()).ok_or_else(|| {
            invalid(
                "backend",
                format!("live backend requires {API_KEY_ENV} to be set"),
            )
        })?;
        let base_url = self
            .base_url
            .clone()
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let mut config = HttpConfig::new(base_url, api_key);
        config.timeout = std::time::Duration::from_secs(self.timeout_secs);
        config.retry = RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        };
        config.requests_per_minute = self.requests_per_minute;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MockSettings {
    /// Script file; `None` means a gold-following script built from the data.
    pub script: Option<PathBuf>,
    pub plan: ScriptPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSettings {
    pub name: DatasetName,
    /// `None` selects the bundled fixture for a benchmark name.
    pub path: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub mapping: FieldMapping,
    pub limit: Option<usize>,
}

impl DatasetSettings {
    pub fn spec(&self) -> Result<DatasetSpec, ConfigError> {
        let path = match &self.path {
            Some(p) => p.clone(),
            None if self.name != DatasetName::Custom => crate::data::fixture_path(self.name),
            None => {
                return Err(ConfigError::Invalid {
                    key: "dataset.path".into(),
                    message: "required for the custom dataset".into(),
                })
            }
        };
        let mut spec = DatasetSpec::infer(self.name, path);
        if let Some(format) = self.format {
            spec.format = format;
        }
        spec.mapping = self.mapping.clone();
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSettings {
    pub endpoint: Option<String>,
    pub script: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub run: RunConfig,
    pub search: SearchSettings,
    pub http: HttpSettings,
    pub replay_store: Option<PathBuf>,
    pub replay_simulate_latency: bool,
    pub record_source: RecordSource,
    pub mock: MockSettings,
    pub dataset: DatasetSettings,
    pub out_dir: PathBuf,
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

impl Settings {
    fn from_layers(l: &Layers) -> Result<Settings, ConfigError> {
        let defaults = RunConfig::default();
        let enabled_agents = match l.list("agents") {
            None => defaults.enabled_agents.clone(),
            Some(codes) => codes
                .iter()
                .map(|c| {
                    AgentId::from_code(&c.to_ascii_uppercase()).ok_or_else(|| {
                        invalid("agents", format!("unknown agent {c:?} (CA, SA, RA)"))
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        let backend_mode = match l.str("backend") {
            None => defaults.backend_mode,
            Some(s) => s.parse().map_err(|e: String| invalid("backend", e))?,
        };
        let run = RunConfig {
            enabled_agents,
            refinement_enabled: l
                .bool("refinement.enabled")
                .unwrap_or(defaults.refinement_enabled),
            search_enabled: l.bool("search.enabled").unwrap_or(defaults.search_enabled),
            max_parallel_samples: l
                .int("max_parallel_samples")
                .map(|v| v as usize)
                .unwrap_or(defaults.max_parallel_samples),
            model: l.str("model").map(String::from).unwrap_or(defaults.model),
            temperature: l.float("temperature").unwrap_or(defaults.temperature),
            llm_justification: l
                .bool("llm_justification")
                .unwrap_or(defaults.llm_justification),
            search_max_documents: l
                .int("search.max_documents")
                .map(|v| v as usize)
                .unwrap_or(defaults.search_max_documents),
            backend_mode,
            template_dir: l.str("templates.dir").map(PathBuf::from),
        };
        run.validate().map_err(|e| invalid("run", e.to_string()))?;

        let search = SearchSettings {
            endpoint: l.str("search.endpoint").map(String::from),
            script: l.str("search.script").map(PathBuf::from),
        };
        if run.search_enabled && search.endpoint.is_none() && search.script.is_none() {
            return Err(invalid(
                "search.enabled",
                "needs search.endpoint or search.script",
            ));
        }

        let record_source = match l.str("record.source").unwrap_or("live") {
            "live" => RecordSource::Live,
            "mock" => RecordSource::Mock,
            other => {
                return Err(invalid(
                    "record.source",
                    format!("{other:?} is not live or mock"),
                ))
            }
        };

        let rate = |key: &str, default: f64| -> Result<f64, ConfigError> {
            let v = l.float(key).unwrap_or(default);
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(invalid(key, format!("{v} outside [0, 1]")))
            }
        };
        let base_plan = ScriptPlan::default();
        let plan = ScriptPlan {
            dissent_rate: rate("mock.dissent_rate", base_plan.dissent_rate)?,
            flip_rate: rate("mock.flip_rate", base_plan.flip_rate)?,
            seed: l.int("mock.seed").unwrap_or(base_plan.seed),
            latency_ms: l.int("mock.latency_ms").or(base_plan.latency_ms),
        };
        if plan.dissent_rate + plan.flip_rate > 1.0 {
            return Err(invalid(
                "mock.flip_rate",
                "dissent and flip rates sum to more than 1",
            ));
        }
        let mock = MockSettings {
            script: l
                .str("mock.script")
                .filter(|s| *s != "gold")
                .map(PathBuf::from),
            plan,
        };

        let name = match l.str("dataset.name") {
            None => DatasetName::SemEval2018,
            Some(s) => s.parse().map_err(|e: String| invalid("dataset.name", e))?,
        };
        let format = match l.str("dataset.format") {
            None => None,
            Some("canonical-jsonl" | "jsonl") => Some(DataFormat::CanonicalJsonl),
            Some("csv") => Some(DataFormat::Csv),
            Some(other) => {
                return Err(invalid(
                    "dataset.format",
                    format!("{other:?} is not canonical-jsonl or csv"),
                ))
            }
        };
        let fm = FieldMapping::default();
        let delimiter = match l.str("dataset.delimiter") {
            None => fm.delimiter,
            Some("\\t" | "tab") => '\t',
            Some(s) if s.chars().count() == 1 => s.chars().next().expect("one char"),
            Some(s) => {
                return Err(invalid(
                    "dataset.delimiter",
                    format!("{s:?} is not a single character"),
                ))
            }
        };
        let mapping = FieldMapping {
            text_column: l
                .str("dataset.text_column")
                .map(String::from)
                .unwrap_or(fm.text_column),
            label_column: match l.str("dataset.label_column") {
                Some("") => None,
                Some(s) => Some(s.to_string()),
                None => fm.label_column,
            },
            positive_label: l
                .str("dataset.positive_label")
                .map(String::from)
                .unwrap_or(fm.positive_label),
            negative_label: l
                .str("dataset.negative_label")
                .map(String::from)
                .unwrap_or(fm.negative_label),
            context_column: l.str("dataset.context_column").map(String::from),
            id_column: l.str("dataset.id_column").map(String::from),
            delimiter,
        };
        let dataset = DatasetSettings {
            name,
            path: l.str("dataset.path").map(PathBuf::from),
            format,
            mapping,
            limit: l.int("dataset.limit").map(|v| v as usize),
        };

        let out_dir = PathBuf::from(l.str("out_dir").unwrap_or("runs"));
        let http = HttpSettings {
            base_url: l.str("http.base_url").map(String::from),
            timeout_secs: l.int("http.timeout_secs").unwrap_or(120),
            max_retries: l
                .int("http.max_retries")
                .map(|v| v as u32)
                .unwrap_or(RetryPolicy::default().max_retries),
            requests_per_minute: l.int("http.requests_per_minute").map(|v| v as u32),
        };
        Ok(Settings {
            run,
            search,
            http,
            replay_store: l.str("replay.store").map(PathBuf::from),
            replay_simulate_latency: l.bool("replay.simulate_latency").unwrap_or(true),
            record_source,
            mock,
            dataset,
            out_dir,
        })
    }

    /// The replay store path, defaulting to `<out_dir>/replay.jsonl`.
    pub fn replay_store_path(&self) -> PathBuf {
        self.replay_store
            .clone()
            .unwrap_or_else(|| self.out_dir.join("replay.jsonl"))
    }
}

/// Applies the layers in precedence order: file, environment, overrides.
pub fn load(
    file: Option<&Path>,
    env: impl Fn(&str) -> Option<String>,
    overrides: &[String],
) -> Result<Settings, ConfigError> {
    let mut layers = Layers::new();
    if let Some(path) = file {
        layers.merge_file(path)?;
    }
    layers.merge_env(env)?;
    for o in overrides {
        layers.merge_override(o)?;
    }
    layers.resolve()
}
