use std::path::PathBuf;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::orchestrator::PendingAnswer;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("token sequences differ in length ({template} vs {line})")]
    LengthMismatch { template: usize, line: usize },

    #[error("invalid drain config: {0}")]
    InvalidConfig(String),

    #[error("unknown log category {reply:?}; pass an explicit category to skip detection")]
    UnknownCategory { reply: String },

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    /// Routing and retrieval finished but the final model call failed; the
    /// payload holds everything needed to retry just that call.
    #[error("answer generation failed: {}", .0.error)]
    Generation(Box<PendingAnswer>),

    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("could not parse router reply: {0}")]
    RouteParse(String),

    #[error("router chose {tool} without parameters")]
    MissingParams { tool: &'static str },

    #[error("keyword list is empty")]
    EmptyKeywords,

    #[error("event id list is empty")]
    EmptyEventIds,

    #[error("text has no tokens after normalization")]
    EmptyText,

    #[error("manifest error{}: {message}", location(.case, .field))]
    Manifest {
        case: Option<usize>,
        field: Option<String>,
        message: String,
    },

    #[error("index cache {path}: {message}")]
    IndexCache { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(case: &Option<usize>, field: &Option<String>) -> String {
    match (case, field) {
        (Some(c), Some(f)) => format!(" in case {c}, field `{f}`"),
        (Some(c), None) => format!(" in case {c}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}
