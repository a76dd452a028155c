//! Content-addressed record/replay store.
//!
//! The store is an append-only JSONL file of [`CacheEntry`] records. Keys are
//! SHA-256 digests over the model, the temperature at fixed precision, and the
//! full message list, so two requests that differ in any byte never alias.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, CallTag, ChatBackend, ChatRequest, ChatResponse, ResponseSource};

/// Hex SHA-256 digest identifying a request.
pub fn cache_key(request: &ChatRequest) -> String {
    // JSON string escaping is injective, so the encoding separates fields
    // unambiguously.
    let messages: Vec<(&str, &str)> = request
        .messages
        .iter()
        .map(|m| {
            let role = match m.role {
                super::Role::System => "system",
                super::Role::User => "user",
                super::Role::Assistant => "assistant",
            };
            (role, m.content.as_str())
        })
        .collect();
    let canonical = serde_json::to_string(&(
        "chat/v1",
        &request.model,
        format!("{:.6}", request.temperature),
        messages,
    ))
    .expect("tuple of strings always serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: ChatRequest,
    pub response_content: String,
    pub created_at: DateTime<Utc>,
    /// Latency observed when the entry was recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

impl CacheEntry {
    pub fn new(request: ChatRequest, response: &ChatResponse) -> CacheEntry {
        CacheEntry {
            key: cache_key(&request),
            request,
            response_content: response.content.clone(),
            created_at: Utc::now(),
            latency_ms: Some(response.latency.as_secs_f64() * 1000.0),
        }
    }
}

/// Append-only JSONL store. Whole records are written under a lock so
/// concurrent recorders never interleave partial lines.
#[derive(Debug)]
pub struct ReplayStore {
    path: PathBuf,
    entries: Mutex<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ReplayStore {
    /// Opens (or creates) a store for recording and lookup.
    pub fn open(path: impl AsRef<Path>) -> Result<ReplayStore, BackendError> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            Self::read_entries(&path)?
        } else {
            HashMap::new()
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ReplayStore {
            path,
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    /// Opens an existing store read-only.
    pub fn load(path: impl AsRef<Path>) -> Result<ReplayStore, BackendError> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            return Err(BackendError::Config(format!(
                "replay store {} does not exist",
                path.display()
            )));
        }
        Ok(ReplayStore {
            entries: Mutex::new(Self::read_entries(&path)?),
            path,
            writer: Mutex::new(None),
        })
    }

    fn read_entries(path: &Path) -> Result<HashMap<String, CacheEntry>, BackendError> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::Io(format!("{}:{}: {e}", path.display(), idx + 1)))?;
            if entry.key != cache_key(&entry.request) {
                return Err(BackendError::Io(format!(
                    "{}:{}: key does not match request digest",
                    path.display(),
                    idx + 1
                )));
            }
            // First record wins; later duplicates are ignored.
            entries.entry(entry.key.clone()).or_insert(entry);
        }
        Ok(entries)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn keys(&self) -> HashSet<String> {
        self.entries.lock().unwrap().keys().cloned().collect()
    }

    /// Persists `entry` unless its key is already stored. Returns whether a
    /// record was written.
    pub fn append(&self, entry: CacheEntry) -> Result<bool, BackendError> {
        let mut entries = self.entries.lock().unwrap();
        if entries.contains_key(&entry.key) {
            return Ok(false);
        }
        let mut writer = self.writer.lock().unwrap();
        let file = writer
            .as_mut()
            .ok_or_else(|| BackendError::Config("replay store opened read-only".into()))?;
        let mut line =
            serde_json::to_string(&entry).map_err(|e| BackendError::Io(e.to_string()))?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.flush()?;
        entries.insert(entry.key.clone(), entry);
        Ok(true)
    }
}

/// Calls the inner backend and persists every response.
pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    store: Arc<ReplayStore>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn ChatBackend>, store: Arc<ReplayStore>) -> RecordingBackend {
        RecordingBackend { inner, store }
    }
}

#[async_trait]
impl ChatBackend for RecordingBackend {
    async fn complete(
        &self,
        request: &ChatRequest,
        tag: &CallTag,
    ) -> Result<ChatResponse, BackendError> {
        let response = self.inner.complete(request, tag).await?;
        self.store
            .append(CacheEntry::new(request.clone(), &response))?;
        Ok(response)
    }
}

/// Strict replay: every request must already be in the store.
pub struct ReplayBackend {
    store: Arc<ReplayStore>,
    simulate_latency: bool,
}

impl ReplayBackend {
    pub fn new(store: Arc<ReplayStore>) -> ReplayBackend {
        ReplayBackend {
            store,
            simulate_latency: false,
        }
    }

    /// Sleep for each entry's recorded latency before answering. Under a
    /// paused tokio clock this reproduces recorded timings deterministically.
    pub fn with_simulated_latency(mut self, on: bool) -> ReplayBackend {
        self.simulate_latency = on;
        self
    }
}

#[async_trait]
impl ChatBackend for ReplayBackend {
    async fn complete(
        &self,
        request: &ChatRequest,
        _tag: &CallTag,
    ) -> Result<ChatResponse, BackendError> {
        let digest = cache_key(request);
        let entry = self
            .store
            .get(&digest)
            .ok_or(BackendError::ReplayMiss { digest })?;
        let latency = entry
            .latency_ms
            .map(|ms| Duration::from_secs_f64(ms.max(0.0) / 1000.0))
            .unwrap_or_default();
        if self.simulate_latency && !latency.is_zero() {
            tokio::time::sleep(latency).await;
        }
        Ok(ChatResponse {
            content: entry.response_content,
            latency,
            source: ResponseSource::Replay,
        })
    }
}
