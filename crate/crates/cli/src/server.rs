//! HTTP API over sessions.
//!
//! Sessions live in memory behind a small LRU. Setup and answering run on
//! the blocking pool; questions within one session are serialized.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use logchat_core::orchestrator::{answer_query, open_session};
use logchat_core::parsing::export_templates_csv;
use logchat_core::{Error, LogCategory, ModelGateway, QueryOptions, Session, SessionOptions, StructuredRow};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail: Value::Null,
            },
        }
    }

    fn detail(mut self, detail: Value) -> Self {
        self.body.detail = detail;
        self
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id}"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Gateway(g) => Self::new(StatusCode::BAD_GATEWAY, "gateway_error", message)
                .detail(json!({ "category": g.kind.as_str() })),
            Error::Generation(p) => Self::new(StatusCode::BAD_GATEWAY, "gateway_error", message).detail(json!({
                "category": p.error.kind.as_str(),
                "route": p.route,
                "prompt_kind": p.prompt_kind,
                "references": p.references,
            })),
            Error::EmptyInput | Error::EmptyKeywords | Error::EmptyEventIds => {
                Self::new(StatusCode::BAD_REQUEST, "empty_input", message)
            }
            Error::UnknownCategory { reply } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_category", message)
                .detail(json!({ "reply": reply, "categories": LogCategory::names() })),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRef {
    pub session_id: String,
    pub file_name: String,
    pub category: String,
    pub line_count: usize,
    pub template_count: usize,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

struct Entry {
    info: SessionRef,
    session: Arc<Session>,
    chat: Arc<tokio::sync::Mutex<()>>,
}

/// Least-recently-used session store.
struct Sessions {
    cap: usize,
    map: HashMap<String, Entry>,
    order: VecDeque<String>,
}

impl Sessions {
    fn touch(&mut self, id: &str) {
        if let Some(pos) = self.order.iter().position(|k| k == id) {
            let k = self.order.remove(pos).expect("position is valid");
            self.order.push_back(k);
        }
    }

    fn get(&mut self, id: &str) -> Option<(Arc<Session>, Arc<tokio::sync::Mutex<()>>)> {
        let found = self.map.get(id).map(|e| (e.session.clone(), e.chat.clone()));
        if found.is_some() {
            self.touch(id);
        }
        found
    }

    fn insert(&mut self, entry: Entry) {
        while self.map.len() >= self.cap {
            let Some(old) = self.order.pop_front() else { break };
            tracing::info!(session = %old, "evicting session");
            self.map.remove(&old);
        }
        self.order.push_back(entry.info.session_id.clone());
        self.map.insert(entry.info.session_id.clone(), entry);
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    gateway: Arc<dyn ModelGateway>,
    session_options: SessionOptions,
    query_options: QueryOptions,
    sessions: Mutex<Sessions>,
    next_id: AtomicU64,
}

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub max_upload_bytes: usize,
    pub max_sessions: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            max_upload_bytes: 50 * 1024 * 1024,
            max_sessions: 8,
        }
    }
}

impl AppState {
    pub fn new(
        gateway: Arc<dyn ModelGateway>,
        session_options: SessionOptions,
        query_options: QueryOptions,
        max_sessions: usize,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                gateway,
                session_options,
                query_options,
                sessions: Mutex::new(Sessions {
                    cap: max_sessions.max(1),
                    map: HashMap::new(),
                    order: VecDeque::new(),
                }),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    fn lookup(&self, id: &str) -> Result<(Arc<Session>, Arc<tokio::sync::Mutex<()>>), ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("session store poisoned")
            .get(id)
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: AppState, opts: &ServerOptions) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/chat", post(chat))
        .route("/api/sessions/{id}/events", get(events))
        .route("/api/sessions/{id}/structured", get(structured))
        .layer(DefaultBodyLimit::max(opts.max_upload_bytes))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let sessions = state.inner.sessions.lock().expect("session store poisoned").map.len();
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "backend": state.inner.gateway.backend_name(),
        "embedding": state.inner.gateway.embedding_id(),
        "sessions": sessions,
    }))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(State(state): State<AppState>, mut form: Multipart) -> Result<Json<SessionRef>, ApiError> {
    let mut file: Option<(String, Vec<u8>)> = None;
    let mut category: Option<LogCategory> = None;
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(ApiError::new(e.status(), "bad_upload", e.body_text())),
        };
        match field.name() {
            Some("file") => {
                let name = field.file_name().unwrap_or("upload.log").to_string();
                let bytes = field
                    .bytes()
                    .await
                    .map_err(|e| ApiError::new(e.status(), "bad_upload", e.body_text()))?;
                file = Some((name, bytes.to_vec()));
            }
            Some("category") => {
                let text = field.text().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
                if !text.trim().is_empty() {
                    category = Some(text.trim().parse().map_err(|e: Error| ApiError::bad_request(e.to_string()))?);
                }
            }
            _ => {}
        }
    }
    let (file_name, bytes) = file.ok_or_else(|| ApiError::bad_request("multipart field `file` is required"))?;
    let raw = String::from_utf8_lossy(&bytes).into_owned();

    let inner = state.inner.clone();
    let name = file_name.clone();
    let session = blocking(move || {
        let opts = SessionOptions {
            category_override: category,
            ..inner.session_options.clone()
        };
        open_session(&name, &raw, inner.gateway.as_ref(), &opts)
    })
    .await?;

    let n = state.inner.next_id.fetch_add(1, Ordering::Relaxed);
    let info = SessionRef {
        session_id: format!("s{n}-{}", &session.content_hash[..12]),
        file_name,
        category: session.category.name().to_string(),
        line_count: session.raw_lines.len(),
        template_count: session.templates.len(),
        created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    state.inner.sessions.lock().expect("session store poisoned").insert(Entry {
        info: info.clone(),
        session: Arc::new(session),
        chat: Arc::new(tokio::sync::Mutex::new(())),
    });
    Ok(Json(info))
}

#[derive(Debug, Deserialize)]
pub struct ChatBody {
    pub question: String,
    #[serde(default)]
    pub max_lines: Option<usize>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

async fn chat(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ChatBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let (session, lock) = state.lookup(&id)?;
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if body.question.trim().is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    let mut opts = state.inner.query_options;
    if let Some(m) = body.max_lines.filter(|m| *m > 0) {
        opts.max_lines = m;
    }
    if let Some(k) = body.top_k.filter(|k| *k > 0) {
        opts.top_k = k;
    }
    let _turn = lock.lock().await;
    let gateway = state.inner.gateway.clone();
    let answer = blocking(move || answer_query(&session, &body.question, gateway.as_ref(), &opts)).await?;
    Ok(Json(answer).into_response())
}

async fn events(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (session, _) = state.lookup(&id)?;
    let csv = export_templates_csv(&session.templates).map_err(ApiError::from)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

#[derive(Debug, Deserialize)]
pub struct StructuredQuery {
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredPage {
    pub headers: Vec<String>,
    pub rows: Vec<StructuredRow>,
}

async fn structured(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StructuredQuery>,
) -> Result<Json<StructuredPage>, ApiError> {
    let (session, _) = state.lookup(&id)?;
    let rows = match q.event.as_deref().map(str::trim).filter(|e| !e.is_empty()) {
        Some(event) => {
            let event = logchat_core::router::normalize_event_id(event);
            session.structured.rows_for_event(&event).cloned().collect()
        }
        None => session.structured.rows.clone(),
    };
    Ok(Json(StructuredPage {
        headers: session.structured.headers.clone(),
        rows,
    }))
}

pub async fn serve(app: Router, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
