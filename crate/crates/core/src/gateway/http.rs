use std::fmt;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use ureq::Agent;

use super::{
    check_embeddings, ChatRequest, GatewayError, GatewayErrorKind, HashEmbedder, ModelGateway,
};

/// Where embeddings come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedBackend {
    #[default]
    Remote,
    /// Offline feature-hashing embedder; no network traffic for embeddings.
    Hash,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first one.
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Clone)]
pub struct HttpGatewayConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.groq.com/openai/v1`.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_model: String,
    pub embed_backend: EmbedBackend,
    pub chat_timeout: Duration,
    pub embed_timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for HttpGatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.groq.com/openai/v1".to_string(),
            api_key: None,
            chat_model: "llama-3.1-70b-versatile".to_string(),
            embed_model: "bge-base-en-v1.5".to_string(),
            embed_backend: EmbedBackend::Remote,
            chat_timeout: Duration::from_secs(60),
            embed_timeout: Duration::from_secs(30),
            retry: RetryPolicy::default(),
        }
    }
}

impl fmt::Debug for HttpGatewayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpGatewayConfig")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("chat_model", &self.chat_model)
            .field("embed_model", &self.embed_model)
            .field("embed_backend", &self.embed_backend)
            .field("chat_timeout", &self.chat_timeout)
            .field("embed_timeout", &self.embed_timeout)
            .field("retry", &self.retry)
            .finish()
    }
}

/// Chat and embedding client for OpenAI-style JSON endpoints.
pub struct HttpGateway {
    config: HttpGatewayConfig,
    chat_agent: Agent,
    embed_agent: Agent,
}

impl fmt::Debug for HttpGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpGateway").field("config", &self.config).finish()
    }
}

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

impl HttpGateway {
    pub fn new(config: HttpGatewayConfig) -> Self {
        Self {
            chat_agent: agent(config.chat_timeout),
            embed_agent: agent(config.embed_timeout),
            config,
        }
    }

    pub fn config(&self) -> &HttpGatewayConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    /// Removes the API key from any text that may end up in an error.
    fn scrub(&self, text: String) -> String {
        match &self.config.api_key {
            Some(key) if !key.is_empty() => text.replace(key.as_str(), "<redacted>"),
            _ => text,
        }
    }

    fn post_once(&self, agent: &Agent, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let mut req = agent.post(&self.url(path));
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| GatewayError::network(self.scrub(e.to_string())))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::network(self.scrub(e.to_string())))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| GatewayError::malformed(format!("response is not JSON: {e}"))),
            401 | 403 => Err(GatewayError::new(
                GatewayErrorKind::Auth,
                format!("HTTP {status}"),
            )),
            429 => Err(GatewayError::new(
                GatewayErrorKind::RateLimit,
                format!("HTTP {status}"),
            )),
            _ => Err(GatewayError::network(format!(
                "HTTP {status}: {}",
                self.scrub(snippet(&text))
            ))),
        }
    }

    /// POSTs `body`, retrying rate-limit responses with exponential backoff.
    fn post(&self, agent: &Agent, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let attempts = self.config.retry.attempts.max(1);
        let mut attempt = 0;
        loop {
            match self.post_once(agent, path, body) {
                Err(e) if e.kind == GatewayErrorKind::RateLimit && attempt + 1 < attempts => {
                    let delay = self.config.retry.base_delay * 2u32.pow(attempt);
                    tracing::warn!(attempt, ?delay, "rate limited, backing off");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.kind == GatewayErrorKind::RateLimit => {
                    return Err(GatewayError::new(
                        GatewayErrorKind::RateLimit,
                        format!("{} after {attempts} attempts", e.message),
                    ))
                }
                other => return other,
            }
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

impl ModelGateway for HttpGateway {
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let model = if request.model_name.is_empty() {
            &self.config.chat_model
        } else {
            &request.model_name
        };
        let mut body = json!({
            "model": model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            // Round through f64 so 0.7f32 goes over the wire as 0.7.
            "temperature": (f64::from(request.temperature) * 1e6).round() / 1e6,
        });
        if let Some(max) = request.max_tokens {
            body["max_tokens"] = json!(max);
        }
        let value = self.post(&self.chat_agent, "chat/completions", &body)?;
        let parsed: ChatResponse = serde_json::from_value(value)
            .map_err(|e| GatewayError::malformed(format!("unexpected chat response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::malformed("chat response has no content"))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::invalid_request("no texts to embed"));
        }
        if self.config.embed_backend == EmbedBackend::Hash {
            return Ok(HashEmbedder.embed(texts));
        }
        let body = json!({"model": self.config.embed_model, "input": texts});
        let value = self.post(&self.embed_agent, "embeddings", &body)?;
        let mut parsed: EmbedResponse = serde_json::from_value(value)
            .map_err(|e| GatewayError::malformed(format!("unexpected embedding response: {e}")))?;
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        let vectors: Vec<Vec<f32>> = parsed.data.into_iter().map(|d| d.embedding).collect();
        check_embeddings(texts.len(), &vectors)?;
        Ok(vectors)
    }

    fn embedding_id(&self) -> String {
        match self.config.embed_backend {
            EmbedBackend::Hash => "hash-256".to_string(),
            EmbedBackend::Remote => format!("remote:{}", self.config.embed_model),
        }
    }

    fn backend_name(&self) -> &'static str {
        "openai-compatible"
    }
}
