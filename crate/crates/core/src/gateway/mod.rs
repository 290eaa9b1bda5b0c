//! Access to chat-completion and embedding backends.
//!
//! [`ModelGateway`] is the single seam between the engine and any model. Two
//! implementations ship with the crate: [`HttpGateway`] speaks the
//! OpenAI-style JSON protocol, and [`MockGateway`] replays a [`MockScript`]
//! for deterministic offline runs.

mod hash_embed;
mod http;
mod mock;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hash_embed::{HashEmbedder, HASH_EMBED_DIM};
pub use http::{EmbedBackend, HttpGateway, HttpGatewayConfig, RetryPolicy};
pub use mock::{Matcher, MockGateway, MockRule, MockScript};

use crate::prompts;

pub const DEFAULT_TEMPERATURE: f32 = 0.7;

/// One system/user exchange sent to a chat backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f32,
    pub max_tokens: Option<u32>,
    pub model_name: String,
}

impl ChatRequest {
    /// A request framed by the Log Analyst system prompt.
    pub fn analyst(user_text: impl Into<String>) -> Self {
        Self {
            system_text: prompts::SYSTEM_INSTRUCTION.to_string(),
            user_text: user_text.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            model_name: String::new(),
        }
    }

    pub fn with_temperature(mut self, temperature: f32) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_model(mut self, model_name: impl Into<String>) -> Self {
        self.model_name = model_name.into();
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::invalid_request("user_text is empty"));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::invalid_request(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// The request as one Llama-3 style prompt string, which is what mock
    /// rules are matched against.
    pub fn rendered(&self) -> String {
        prompts::render_chat_frame(&self.system_text, &self.user_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayErrorKind {
    Network,
    Auth,
    RateLimit,
    MalformedResponse,
    InvalidRequest,
    DimensionMismatch,
}

impl GatewayErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Network => "network",
            Self::Auth => "auth",
            Self::RateLimit => "rate_limit",
            Self::MalformedResponse => "malformed_response",
            Self::InvalidRequest => "invalid_request",
            Self::DimensionMismatch => "dimension_mismatch",
        }
    }
}

impl fmt::Display for GatewayErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Failure talking to a model backend. Messages never carry credentials.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("gateway {kind} error: {message}")]
pub struct GatewayError {
    pub kind: GatewayErrorKind,
    pub message: String,
}

impl GatewayError {
    pub fn new(kind: GatewayErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn network(message: impl Into<String>) -> Self {
        Self::new(GatewayErrorKind::Network, message)
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(GatewayErrorKind::MalformedResponse, message)
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::new(GatewayErrorKind::InvalidRequest, message)
    }

    pub fn dimension_mismatch(expected: usize, found: usize) -> Self {
        Self::new(
            GatewayErrorKind::DimensionMismatch,
            format!("expected dimension {expected}, got {found}"),
        )
    }
}

/// Chat completion and embedding backend.
///
/// Implementations must be shareable across threads; every call is
/// independent of the others.
pub trait ModelGateway: Send + Sync {
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;

    /// One vector per input text, all of the same dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError>;

    /// Identifies the embedding space, used to key cached indexes.
    fn embedding_id(&self) -> String {
        "unknown".to_string()
    }

    /// Short label for health reporting.
    fn backend_name(&self) -> &'static str {
        "custom"
    }
}

impl<G: ModelGateway + ?Sized> ModelGateway for &G {
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat_complete(request)
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        (**self).embed(texts)
    }
    fn embedding_id(&self) -> String {
        (**self).embedding_id()
    }
    fn backend_name(&self) -> &'static str {
        (**self).backend_name()
    }
}

impl<G: ModelGateway + ?Sized> ModelGateway for std::sync::Arc<G> {
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat_complete(request)
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        (**self).embed(texts)
    }
    fn embedding_id(&self) -> String {
        (**self).embedding_id()
    }
    fn backend_name(&self) -> &'static str {
        (**self).backend_name()
    }
}

/// Checks the embed contract: non-empty input, one finite vector per text,
/// a single dimension throughout.
pub(crate) fn check_embeddings(
    inputs: usize,
    vectors: &[Vec<f32>],
) -> Result<usize, GatewayError> {
    if vectors.len() != inputs {
        return Err(GatewayError::malformed(format!(
            "expected {inputs} embeddings, got {}",
            vectors.len()
        )));
    }
    let dim = vectors.first().map_or(0, Vec::len);
    for v in vectors {
        if v.len() != dim {
            return Err(GatewayError::dimension_mismatch(dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GatewayError::malformed("embedding has non-finite component"));
        }
    }
    Ok(dim)
}
