use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PromptError;
use crate::backend::BackendError;

/// Unrecoverable failure of one sample's pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "source", content = "error", rename_all = "snake_case")]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("configuration error: {0}")]
    Config(String),
}
