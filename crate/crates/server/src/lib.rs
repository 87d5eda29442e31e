//! HTTP+JSON front end for suggestion sessions.
//!
//! The graph is shared read-only; each session sits behind its own mutex so
//! requests against one session are serialized while different sessions
//! proceed independently.

mod error;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use conceptwalk::mindmap::MapDocument;
use conceptwalk::session::{Decision, EditAction, EditOutcome, Offer, SessionConfig};
use conceptwalk::{KnowledgeGraph, NodeId, Regime, Session};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ErrorBody};

pub const DEFAULT_AUTOCOMPLETE_LIMIT: usize = 10;
pub const MAX_AUTOCOMPLETE_LIMIT: usize = 100;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    graph: Arc<KnowledgeGraph>,
    config: SessionConfig,
    clock: Clock,
    next_id: AtomicU64,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(graph: Arc<KnowledgeGraph>) -> Self {
        Self::with_clock(graph, SessionConfig::default(), Arc::new(Utc::now))
    }

    /// Timestamps in logs and maps come from `clock`; tests pass a fixed one.
    pub fn with_clock(graph: Arc<KnowledgeGraph>, config: SessionConfig, clock: Clock) -> Self {
        Self {
            inner: Arc::new(Inner {
                graph,
                config,
                clock,
                next_id: AtomicU64::new(1),
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.inner.graph
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session table poisoned").len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(id))
    }

    fn now(&self) -> DateTime<Utc> {
        (self.inner.clock)()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/suggestions", post(request_suggestions))
        .route("/sessions/{id}/resolve", post(resolve))
        .route("/sessions/{id}/edits", post(edit))
        .route("/sessions/{id}/export", get(export))
        .route("/autocomplete", get(autocomplete))
        .with_state(state)
}

/// Serves `router(state)` on `listener` until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub root: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingView {
    pub source_node: NodeId,
    pub source: String,
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub seed: u64,
    pub next_regime: Regime,
    pub pending: Option<PendingView>,
    pub map: MapDocument,
}

impl SessionView {
    fn of(s: &Session) -> Self {
        Self {
            session_id: s.id().to_string(),
            seed: s.seed(),
            next_regime: s.next_regime(),
            pending: s.pending().map(|b| PendingView {
                source_node: b.source_node,
                source: b.source_concept.clone(),
                suggestions: b.offered.clone(),
            }),
            map: s.map().to_document(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestionRequest {
    pub node_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveResponse {
    pub accepted_node: Option<NodeId>,
    pub map: MapDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub outcome: EditOutcome,
    pub map: MapDocument,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AutocompleteQuery {
    #[serde(default)]
    pub q: String,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocompleteResponse {
    pub labels: Vec<String>,
}

fn lock(s: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    s.lock().expect("session mutex poisoned")
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let id = format!("s{}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let session = Session::create(state.graph(), id.clone(), &req.root, req.seed, state.now(), state.inner.config)?;
    let view = SessionView::of(&session);
    state
        .inner
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = state.session(&id)?;
    let view = SessionView::of(&lock(&session));
    Ok(Json(view))
}

async fn request_suggestions(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SuggestionRequest>, JsonRejection>,
) -> Result<Json<Offer>, ApiError> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    let offer = lock(&session).request_suggestions(state.graph(), req.node_id, state.now())?;
    Ok(Json(offer))
}

async fn resolve(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Decision>, JsonRejection>,
) -> Result<Json<ResolveResponse>, ApiError> {
    let Json(decision) = body?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let accepted_node = s.resolve_batch(&decision)?;
    Ok(Json(ResolveResponse {
        accepted_node,
        map: s.map().to_document(),
    }))
}

async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<EditAction>, JsonRejection>,
) -> Result<Json<EditResponse>, ApiError> {
    let Json(action) = body?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let outcome = s.edit(state.graph(), &action)?;
    Ok(Json(EditResponse {
        outcome,
        map: s.map().to_document(),
    }))
}

/// The body is exactly `SessionExport::to_json`, so a saved export and a
/// fetched one compare byte for byte.
async fn export(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let body = lock(&session).export().to_json();
    Ok(([(header::CONTENT_TYPE, "application/json")], body))
}

async fn autocomplete(
    State(state): State<AppState>,
    query: Result<Query<AutocompleteQuery>, QueryRejection>,
) -> Result<Json<AutocompleteResponse>, ApiError> {
    let Query(q) = query?;
    let limit = q.limit.unwrap_or(DEFAULT_AUTOCOMPLETE_LIMIT).min(MAX_AUTOCOMPLETE_LIMIT);
    let mut prefix = q.q.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_");
    if !prefix.is_empty() && q.q.ends_with(char::is_whitespace) {
        prefix.push('_');
    }
    let labels = state.graph().autocomplete(&prefix, limit).into_iter().map(str::to_string).collect();
    Ok(Json(AutocompleteResponse { labels }))
}
