//! Settings from `logchat.toml`, overridden by `LOGCHAT_*` variables.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use logchat_core::gateway::{EmbedBackend, HttpGateway, HttpGatewayConfig, MockGateway, MockScript};
use logchat_core::parsing::DrainRegistry;
use logchat_core::{ModelGateway, QueryOptions, SessionOptions};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gateway: GatewaySettings,
    pub engine: EngineSettings,
    pub server: ServerSettings,
}

#[derive(Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySettings {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_model: String,
    pub embed_backend: EmbedBackend,
    pub temperature: f32,
    pub chat_timeout_secs: u64,
    pub embed_timeout_secs: u64,
    /// Replaces the HTTP backend with a scripted one.
    pub mock_script: Option<PathBuf>,
}

impl std::fmt::Debug for GatewaySettings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GatewaySettings")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("chat_model", &self.chat_model)
            .field("embed_model", &self.embed_model)
            .field("embed_backend", &self.embed_backend)
            .field("temperature", &self.temperature)
            .field("mock_script", &self.mock_script)
            .finish_non_exhaustive()
    }
}

impl Default for GatewaySettings {
    fn default() -> Self {
        let http = HttpGatewayConfig::default();
        Self {
            endpoint: http.endpoint,
            api_key: None,
            chat_model: http.chat_model,
            embed_model: http.embed_model,
            embed_backend: http.embed_backend,
            temperature: logchat_core::gateway::DEFAULT_TEMPERATURE,
            chat_timeout_secs: http.chat_timeout.as_secs(),
            embed_timeout_secs: http.embed_timeout.as_secs(),
            mock_script: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub max_lines: usize,
    pub chunk_budget: usize,
    pub top_k: usize,
    /// Directory of `<Category>.toml` files overriding the built-in Drain
    /// settings.
    pub drain_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        let q = QueryOptions::default();
        Self {
            max_lines: q.max_lines,
            chunk_budget: logchat_core::indexer::DEFAULT_CHUNK_BUDGET,
            top_k: q.top_k,
            drain_dir: None,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub host: String,
    pub port: u16,
    pub max_upload_mb: usize,
    pub max_sessions: usize,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            max_upload_mb: 50,
            max_sessions: 8,
        }
    }
}

fn env_parse<T: std::str::FromStr>(vars: &dyn Fn(&str) -> Option<String>, key: &str) -> anyhow::Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match vars(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("{key}={v:?}: {e}")),
    }
}

impl Config {
    /// Reads `path` if given, else `./logchat.toml` when it exists, then
    /// applies environment overrides.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None if Path::new("logchat.toml").exists() => Self::from_file(Path::new("logchat.toml"))?,
            None => Self::default(),
        };
        config.apply_env(&|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply_env(&mut self, vars: &dyn Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        let g = &mut self.gateway;
        if let Some(v) = vars("LOGCHAT_ENDPOINT") {
            g.endpoint = v;
        }
        if let Some(v) = vars("LOGCHAT_API_KEY") {
            g.api_key = Some(v);
        }
        if let Some(v) = vars("LOGCHAT_CHAT_MODEL") {
            g.chat_model = v;
        }
        if let Some(v) = vars("LOGCHAT_EMBED_MODEL") {
            g.embed_model = v;
        }
        if let Some(v) = vars("LOGCHAT_EMBED_BACKEND") {
            g.embed_backend = match v.as_str() {
                "remote" => EmbedBackend::Remote,
                "hash" => EmbedBackend::Hash,
                other => bail!("LOGCHAT_EMBED_BACKEND={other:?}: expected remote or hash"),
            };
        }
        if let Some(v) = vars("LOGCHAT_MOCK_SCRIPT") {
            g.mock_script = Some(v.into());
        }
        if let Some(v) = env_parse(vars, "LOGCHAT_TEMPERATURE")? {
            g.temperature = v;
        }
        let e = &mut self.engine;
        if let Some(v) = env_parse(vars, "LOGCHAT_MAX_LINES")? {
            e.max_lines = v;
        }
        if let Some(v) = env_parse(vars, "LOGCHAT_CHUNK_BUDGET")? {
            e.chunk_budget = v;
        }
        if let Some(v) = env_parse(vars, "LOGCHAT_TOP_K")? {
            e.top_k = v;
        }
        if let Some(v) = vars("LOGCHAT_DRAIN_DIR") {
            e.drain_dir = Some(v.into());
        }
        if let Some(v) = vars("LOGCHAT_CACHE_DIR") {
            e.cache_dir = Some(v.into());
        }
        if let Some(v) = env_parse(vars, "LOGCHAT_PORT")? {
            self.server.port = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(0.0..=2.0).contains(&self.gateway.temperature) {
            bail!("temperature must be within [0, 2]");
        }
        if self.engine.max_lines == 0 || self.engine.chunk_budget == 0 || self.engine.top_k == 0 {
            bail!("max_lines, chunk_budget and top_k must be positive");
        }
        if self.server.max_sessions == 0 {
            bail!("max_sessions must be positive");
        }
        Ok(())
    }

    pub fn gateway(&self) -> anyhow::Result<Arc<dyn ModelGateway>> {
        let g = &self.gateway;
        if let Some(path) = &g.mock_script {
            let script = MockScript::load(path).with_context(|| format!("loading mock script {}", path.display()))?;
            return Ok(Arc::new(MockGateway::new(script)));
        }
        Ok(Arc::new(HttpGateway::new(HttpGatewayConfig {
            endpoint: g.endpoint.clone(),
            api_key: g.api_key.clone(),
            chat_model: g.chat_model.clone(),
            embed_model: g.embed_model.clone(),
            embed_backend: g.embed_backend,
            chat_timeout: Duration::from_secs(g.chat_timeout_secs),
            embed_timeout: Duration::from_secs(g.embed_timeout_secs),
            ..HttpGatewayConfig::default()
        })))
    }

    pub fn session_options(&self) -> anyhow::Result<SessionOptions> {
        let registry = match &self.engine.drain_dir {
            Some(dir) => DrainRegistry::with_overrides(dir).with_context(|| format!("loading {}", dir.display()))?,
            None => DrainRegistry::builtin(),
        };
        Ok(SessionOptions {
            category_override: None,
            registry,
            chunk_budget: self.engine.chunk_budget,
            cache_dir: self.engine.cache_dir.clone(),
            temperature: self.gateway.temperature,
        })
    }

    pub fn query_options(&self) -> QueryOptions {
        QueryOptions {
            max_lines: self.engine.max_lines,
            top_k: self.engine.top_k,
            temperature: self.gateway.temperature,
        }
    }
}
