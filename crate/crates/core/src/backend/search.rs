//! External knowledge retrieval for the Context Agent.

use std::collections::BTreeMap;
use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BackendError, CallRole, ChatBackend, ChatRequest};
use crate::trace::{EventKind, TraceRecorder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub query: String,
    pub documents: Vec<Document>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("search provider unavailable: {0}")]
pub struct SearchError(pub String);

#[async_trait]
pub trait SearchProvider: Send + Sync {
    async fn retrieve(&self, query: &str, limit: usize) -> Result<Vec<Document>, SearchError>;

    /// The null provider never performs retrieval.
    fn is_null(&self) -> bool {
        false
    }
}

/// Default provider: no retrieval, no network.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSearch;

#[async_trait]
impl SearchProvider for NullSearch {
    async fn retrieve(&self, _query: &str, _limit: usize) -> Result<Vec<Document>, SearchError> {
        Ok(Vec::new())
    }

    fn is_null(&self) -> bool {
        true
    }
}

/// Canned documents keyed by exact query, with an optional fallback list.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedSearch {
    #[serde(default)]
    pub queries: BTreeMap<String, Vec<Document>>,
    #[serde(default)]
    pub default: Vec<Document>,
    /// When set, every retrieval fails with this message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<String>,
}

impl ScriptedSearch {
    pub fn from_path(path: impl AsRef<Path>) -> Result<ScriptedSearch, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("search script {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("search script {}: {e}", path.display())))
    }
}

#[async_trait]
impl SearchProvider for ScriptedSearch {
    async fn retrieve(&self, query: &str, limit: usize) -> Result<Vec<Document>, SearchError> {
        if let Some(msg) = &self.fail {
            return Err(SearchError(msg.clone()));
        }
        let docs = self.queries.get(query).unwrap_or(&self.default);
        Ok(docs.iter().take(limit).cloned().collect())
    }
}

/// Queries a JSON search endpoint: `GET {endpoint}?q=<query>&k=<limit>`
/// answering with `[{"title": ..., "snippet": ...}, ...]`.
pub struct HttpSearchProvider {
    client: reqwest::Client,
    endpoint: String,
}

impl HttpSearchProvider {
    pub fn new(endpoint: impl Into<String>) -> HttpSearchProvider {
        HttpSearchProvider {
            client: reqwest::Client::new(),
            endpoint: endpoint.into(),
        }
    }
}

#[async_trait]
impl SearchProvider for HttpSearchProvider {
    async fn retrieve(&self, query: &str, limit: usize) -> Result<Vec<Document>, SearchError> {
        let response = self
            .client
            .get(&self.endpoint)
            .query(&[("q", query), ("k", &limit.to_string())])
            .send()
            .await
            .and_then(|r| r.error_for_status())
            .map_err(|e| SearchError(e.to_string()))?;
        let mut docs: Vec<Document> = response
            .json()
            .await
            .map_err(|e| SearchError(e.to_string()))?;
        docs.truncate(limit);
        Ok(docs)
    }
}

fn summary_prompt(query: &str, documents: &[Document]) -> String {
    let mut prompt = format!(
        "Condense the following search results into a short factual summary \
         (at most five sentences) of background knowledge relevant to the query.\n\n\
         Query: {query}\n\n"
    );
    for (i, doc) in documents.iter().enumerate() {
        prompt.push_str(&format!("[{}] {}\n{}\n\n", i + 1, doc.title, doc.snippet));
    }
    prompt.push_str("Summary:");
    prompt
}

/// Retrieves up to `limit` documents and condenses them with one backend
/// call. Provider failures degrade to an empty result, logged in the trace.
pub async fn search(
    provider: &dyn SearchProvider,
    backend: &dyn ChatBackend,
    trace: &TraceRecorder,
    query: &str,
    model: &str,
    limit: usize,
) -> Result<SearchResult, BackendError> {
    let empty = SearchResult {
        query: query.to_string(),
        ..Default::default()
    };
    if provider.is_null() {
        return Ok(empty);
    }
    let documents = match provider.retrieve(query, limit).await {
        Ok(docs) => docs,
        Err(err) => {
            tracing::warn!(sample = trace.sample_id(), %err, "search degraded to empty result");
            trace.record(EventKind::Search {
                query: query.to_string(),
                documents: 0,
                error: Some(err.to_string()),
            });
            return Ok(empty);
        }
    };
    trace.record(EventKind::Search {
        query: query.to_string(),
        documents: documents.len(),
        error: None,
    });
    if documents.is_empty() {
        return Ok(empty);
    }
    let request = ChatRequest::user(model, summary_prompt(query, &documents));
    let response = trace
        .complete(backend, &request, CallRole::SearchSummary, None)
        .await?;
    let mut summary = response.content.trim().to_string();
    if summary.is_empty() {
        summary = documents
            .iter()
            .map(|d| d.snippet.as_str())
            .collect::<Vec<_>>()
            .join(" ");
    }
    Ok(SearchResult {
        query: query.to_string(),
        documents,
        summary,
    })
}
