//! Session setup and per-question answering.
//!
//! Opening a session chunks and embeds the file, asks the model for its log
//! category and parses it into event templates. Each question is then routed,
//! searched, turned into the matching stage prompt and sent for generation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, GatewayError, ModelGateway, DEFAULT_TEMPERATURE};
use crate::indexer::{self, ChunkIndex, IndexCache, ScoredChunk, DEFAULT_CHUNK_BUDGET, DEFAULT_TOP_K};
use crate::parsing::{self, DrainRegistry, EventTemplate, LogCategory, StructuredLog};
use crate::prompts::{self, AllEventContext, MatchContext};
use crate::router::{self, RouteDecision, SearchTool, Tier};
use crate::search::{self, SearchResult, DEFAULT_MAX_LINES};
use crate::{Error, Result};

/// Everything derived from one uploaded file. Read-only once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub log_file_name: String,
    pub content_hash: String,
    pub raw_lines: Vec<String>,
    pub category: LogCategory,
    pub structured: StructuredLog,
    pub templates: Vec<EventTemplate>,
    pub index: ChunkIndex,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Skips the recognizer call when set.
    pub category_override: Option<LogCategory>,
    pub registry: DrainRegistry,
    pub chunk_budget: usize,
    pub cache_dir: Option<PathBuf>,
    pub temperature: f32,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            category_override: None,
            registry: DrainRegistry::builtin(),
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            cache_dir: None,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOptions {
    pub max_lines: usize,
    pub top_k: usize,
    pub temperature: f32,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            max_lines: DEFAULT_MAX_LINES,
            top_k: DEFAULT_TOP_K,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    AllEvent,
    Retrieve,
    Search,
    Event,
    General,
}

impl PromptKind {
    pub fn for_route(route: &RouteDecision) -> Self {
        match (route.tier, route.tool) {
            (Tier::All, _) => Self::AllEvent,
            (Tier::General, _) => Self::General,
            (Tier::Partial, Some(SearchTool::Keyword)) => Self::Search,
            (Tier::Partial, Some(SearchTool::Event)) => Self::Event,
            (Tier::Partial, _) => Self::Retrieve,
        }
    }
}

/// Evidence attached to a `Partial` answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum References {
    Lines {
        #[serde(flatten)]
        result: SearchResult,
        #[serde(skip_serializing_if = "Vec::is_empty", default)]
        unknown_ids: Vec<String>,
    },
    Chunks {
        chunks: Vec<ScoredChunk>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub route: RouteDecision,
    pub references: Option<References>,
    pub prompt_kind: PromptKind,
    /// Why routing fell back to semantic search, when it did.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub routing_fallback: Option<String>,
    /// The user message sent for generation.
    #[serde(skip)]
    pub prompt: String,
}

/// A question whose final model call failed. Pass it to [`retry_generation`]
/// to try again without routing or searching a second time.
#[derive(Debug, Clone)]
pub struct PendingAnswer {
    pub route: RouteDecision,
    pub routing_fallback: Option<String>,
    pub references: Option<References>,
    pub prompt_kind: PromptKind,
    pub prompt: String,
    pub temperature: f32,
    pub error: GatewayError,
}

pub fn open_session<G: ModelGateway + ?Sized>(
    file_name: &str,
    raw_text: &str,
    gateway: &G,
    opts: &SessionOptions,
) -> Result<Session> {
    if raw_text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let raw_lines: Vec<String> = indexer::split_lines(raw_text).into_iter().map(str::to_string).collect();

    let cache = opts.cache_dir.as_ref().map(IndexCache::new);
    let index = indexer::build_or_load(raw_text, opts.chunk_budget, gateway, cache.as_ref())?;

    let category = match opts.category_override {
        Some(c) => c,
        None => parsing::identify_log_type(&raw_lines, gateway, opts.temperature)?,
    };
    let config = opts.registry.get(category);
    let (structured, templates) = parsing::parse_lines(&raw_lines, &config)?;
    tracing::info!(
        file = file_name,
        %category,
        lines = raw_lines.len(),
        templates = templates.len(),
        chunks = index.len(),
        "session ready"
    );
    Ok(Session {
        log_file_name: file_name.to_string(),
        content_hash: indexer::content_hash(raw_text),
        raw_lines,
        category,
        structured,
        templates,
        index,
    })
}

impl Session {
    pub fn all_event_prompt(&self, question: &str) -> Result<String> {
        let rows = parsing::templates_csv_rows(&self.templates)?;
        let ctx = AllEventContext {
            log_file_name: &self.log_file_name,
            template_rows: &rows,
            first_line: self.raw_lines.first().map_or("", String::as_str),
            last_line: self.raw_lines.last().map_or("", String::as_str),
            line_count: self.raw_lines.len(),
            template_count: self.templates.len(),
        };
        Ok(prompts::render_all_event(&ctx, question))
    }
}

fn match_context<'a>(result: &SearchResult, lines: &'a [&'a str], max_lines: usize) -> MatchContext<'a> {
    MatchContext {
        total: result.total,
        truncated: result.truncated,
        max_lines,
        lines,
    }
}

pub fn answer_query<G: ModelGateway + ?Sized>(
    session: &Session,
    question: &str,
    gateway: &G,
    opts: &QueryOptions,
) -> Result<Answer> {
    if question.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let routed = router::route(question, gateway, opts.temperature)?;
    let route = routed.decision;
    let prompt_kind = PromptKind::for_route(&route);

    let (prompt, references) = match prompt_kind {
        PromptKind::General => (question.to_string(), None),
        PromptKind::AllEvent => (session.all_event_prompt(question)?, None),
        PromptKind::Search => {
            let keywords = route.keywords.as_deref().unwrap_or_default();
            let result = search::truncate_context(search::keyword_search(&session.raw_lines, keywords)?, opts.max_lines);
            let lines = result.lines();
            let prompt = prompts::render_search(&match_context(&result, &lines, opts.max_lines), keywords, question);
            (prompt, Some(References::Lines { result, unknown_ids: Vec::new() }))
        }
        PromptKind::Event => {
            let ids = route.event_ids.as_deref().unwrap_or_default();
            let found = search::event_search(&session.structured, &session.templates, ids)?;
            let result = search::truncate_context(found.result, opts.max_lines);
            let lines = result.lines();
            let prompt = prompts::render_event(
                &match_context(&result, &lines, opts.max_lines),
                ids,
                &found.templates,
                question,
            );
            (
                prompt,
                Some(References::Lines {
                    result,
                    unknown_ids: found.unknown_ids,
                }),
            )
        }
        PromptKind::Retrieve => {
            let chunks = indexer::semantic_search(&session.index, question, opts.top_k, gateway)?;
            let texts: Vec<&str> = chunks.iter().map(|c| c.chunk.text.as_str()).collect();
            (prompts::render_retrieve(&texts, question), Some(References::Chunks { chunks }))
        }
    };

    let pending = PendingAnswer {
        route,
        routing_fallback: routed.fallback,
        references,
        prompt_kind,
        prompt,
        temperature: opts.temperature,
        error: GatewayError::network("not attempted"),
    };
    retry_generation(pending, gateway)
}

/// Runs the generation call of a pending answer.
pub fn retry_generation<G: ModelGateway + ?Sized>(mut pending: PendingAnswer, gateway: &G) -> Result<Answer> {
    let request = ChatRequest::analyst(pending.prompt.clone()).with_temperature(pending.temperature);
    match gateway.chat_complete(&request) {
        Ok(text) => Ok(Answer {
            text,
            route: pending.route,
            references: pending.references,
            prompt_kind: pending.prompt_kind,
            routing_fallback: pending.routing_fallback,
            prompt: pending.prompt,
        }),
        Err(error) => {
            pending.error = error;
            Err(Error::Generation(Box::new(pending)))
        }
    }
}
