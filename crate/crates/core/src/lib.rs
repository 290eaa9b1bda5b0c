//! Log-analysis chatbot engine.
//!
//! A log file goes through two setup stages when it is opened: it is cut into
//! line-aligned chunks and embedded for semantic retrieval, and it is parsed
//! into event templates with a Drain parse tree after an LLM names its log
//! category. Each question is then routed by a two-level LLM router to one of
//! three answering tiers:
//!
//! * `All`: the whole event table is handed to the model.
//! * `Partial`: a keyword, event-id or semantic search narrows the context.
//! * `General`: the question is answered without any log context.
//!
//! [`orchestrator::open_session`] and [`orchestrator::answer_query`] are the
//! two entry points; the remaining modules are usable on their own.

pub mod error;
pub mod eval;
pub mod gateway;
pub mod indexer;
mod json_extract;
pub mod orchestrator;
pub mod parsing;
pub mod prompts;
pub mod router;
pub mod search;

pub use error::{Error, Result};
pub use gateway::{ChatRequest, GatewayError, GatewayErrorKind, ModelGateway};
pub use indexer::{Chunk, ChunkIndex, ScoredChunk};
pub use orchestrator::{Answer, PromptKind, QueryOptions, References, Session, SessionOptions};
pub use parsing::{DrainConfig, EventTemplate, LogCategory, StructuredLog, StructuredRow};
pub use router::{RouteDecision, SearchTool, Tier};
pub use search::{EventSearch, MatchedLine, SearchResult};
