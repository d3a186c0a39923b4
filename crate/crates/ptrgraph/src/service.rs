//! HTTP/JSON session service.
//!
//! Every mutating response carries the full post-state graph and the diff, so
//! clients never rewrite graphs themselves. Requests to one session are
//! serialized by a per-session lock; a request may send `If-Match: <n>` with
//! the history length it expects and gets 409 if another client got there
//! first.

use std::collections::hash_map::RandomState;
use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path as UrlPath, Query, Request, State};
use axum::http::{request::Parts, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use ptrgraph_core::frontend::parse_declarations;
use ptrgraph_core::{Session, StepError};

use crate::json::{
    self, AttrValue, ConfigDoc, ErrorDoc, GraphDocument, MatchDoc, ReportDoc, SessionSnapshot, StepDoc, TraceDocument,
    VerdictDoc,
};

/// Method and path of every endpoint, as documented in `docs/openapi.json`.
pub const ROUTES: &[(&str, &str)] = &[
    ("post", "/sessions"),
    ("delete", "/sessions/{id}"),
    ("get", "/sessions/{id}/graph"),
    ("post", "/sessions/{id}/statements"),
    ("get", "/sessions/{id}/rules"),
    ("get", "/sessions/{id}/matches"),
    ("post", "/sessions/{id}/apply"),
    ("post", "/sessions/{id}/undo"),
    ("get", "/sessions/{id}/trace"),
    ("post", "/sessions/{id}/check"),
    ("get", "/openapi.json"),
];

pub const OPENAPI: &str = include_str!("../docs/openapi.json");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory for one JSON snapshot per session.
    pub data_dir: Option<PathBuf>,
    /// Idle time after which a session leaves memory.
    pub ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: None,
            ttl: Duration::from_secs(3600),
        }
    }
}

struct Entry {
    session: tokio::sync::Mutex<Session>,
    created_at: u64,
    touched: Mutex<Instant>,
}

impl Entry {
    fn new(session: Session, created_at: u64) -> Arc<Self> {
        Arc::new(Entry {
            session: tokio::sync::Mutex::new(session),
            created_at,
            touched: Mutex::new(Instant::now()),
        })
    }
}

/// Shared service state: the session table and configuration.
pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Entry>>>,
    hasher: RandomState,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            sessions: Mutex::new(HashMap::new()),
            hasher: RandomState::new(),
            counter: AtomicU64::new(0),
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the TTL as of `now`. Persisted
    /// sessions stay on disk and are reloaded on their next request.
    pub fn evict(&self, now: Instant) -> usize {
        let ttl = self.config.ttl;
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, e| now.saturating_duration_since(*e.touched.lock().unwrap()) <= ttl);
        before - map.len()
    }

    fn fresh_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_nanos() as u64;
        let mut parts = [0u64; 2];
        for (i, p) in parts.iter_mut().enumerate() {
            let mut h = self.hasher.build_hasher();
            h.write_u64(n);
            h.write_u64(nanos);
            h.write_usize(i);
            *p = h.finish();
        }
        format!("{:016x}{:016x}", parts[0], parts[1])
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.config.data_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn lookup(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::not_found(id));
        }
        if let Some(e) = self.sessions.lock().unwrap().get(id) {
            *e.touched.lock().unwrap() = Instant::now();
            return Ok(e.clone());
        }
        let path = self
            .snapshot_path(id)
            .filter(|p| p.exists())
            .ok_or_else(|| ApiError::not_found(id))?;
        let text = std::fs::read_to_string(&path).map_err(ApiError::internal)?;
        let snap: SessionSnapshot = json::decode(&text).map_err(ApiError::internal)?;
        let session = snap
            .restore()
            .map_err(|e| ApiError::internal(format!("replaying {id}: {e}")))?;
        let mut map = self.sessions.lock().unwrap();
        let entry = map
            .entry(id.to_string())
            .or_insert_with(|| Entry::new(session, snap.created_at));
        Ok(entry.clone())
    }

    fn persist(&self, id: &str, entry: &Entry, session: &Session) -> Result<(), ApiError> {
        let Some(path) = self.snapshot_path(id) else {
            return Ok(());
        };
        let snap = SessionSnapshot::capture(id, session, entry.created_at);
        write_atomic(
            &path,
            &serde_json::to_string_pretty(&snap).expect("snapshots serialize"),
        )
        .map_err(ApiError::internal)
    }

    fn remove(&self, id: &str) -> Result<(), ApiError> {
        let in_memory = self.sessions.lock().unwrap().remove(id).is_some();
        let on_disk = match self.snapshot_path(id).filter(|p| valid_id(id) && p.exists()) {
            Some(p) => {
                std::fs::remove_file(p).map_err(ApiError::internal)?;
                true
            }
            None => false,
        };
        if in_memory || on_disk {
            Ok(())
        } else {
            Err(ApiError::not_found(id))
        }
    }
}

fn valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorDoc,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: ErrorDoc::new(kind, message),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`"))
    }

    fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MalformedBody", message)
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<StepError> for ApiError {
    fn from(e: StepError) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorDoc::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// JSON body whose rejections become 400 responses in the error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request(rejection_text(&e))),
        }
    }
}

fn rejection_text(e: &JsonRejection) -> String {
    e.body_text()
}

/// Query string with rejections mapped like [`Body`].
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        match Query::<T>::from_request_parts(parts, state).await {
            Ok(Query(v)) => Ok(Params(v)),
            Err(e) => Err(ApiError::bad_request(QueryRejection::body_text(&e))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub decls: String,
    #[serde(default)]
    pub config: ConfigDoc,
    #[serde(default)]
    pub input: Vec<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub session_id: String,
    pub graph: GraphDocument,
    pub reports: Vec<ReportDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphView {
    pub graph: GraphDocument,
    pub reports: Vec<ReportDoc>,
    pub history_length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepResult {
    #[serde(flatten)]
    pub step: StepDoc,
    pub history_length: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementBody {
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ApplyBody {
    pub rule: String,
    pub match_index: usize,
    #[serde(default)]
    pub params: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBody {
    pub formula: String,
}

#[derive(Debug, Deserialize)]
pub struct MatchesQuery {
    pub rule: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RuleInfo {
    pub name: String,
    pub description: String,
    pub params: Vec<String>,
}

type Shared = State<Arc<AppState>>;

/// Rejects the request with 409 if `If-Match` names a different history length.
fn precondition(headers: &HeaderMap, s: &Session) -> Result<(), ApiError> {
    let Some(v) = headers.get(axum::http::header::IF_MATCH) else {
        return Ok(());
    };
    let expected = v
        .to_str()
        .ok()
        .map(|t| t.trim().trim_matches('"'))
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "MalformedHeader",
                "If-Match must be a history length",
            )
        })?;
    let actual = s.history().len();
    if expected != actual {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "Conflict",
            format!("session has {actual} steps, request expected {expected}"),
        ));
    }
    Ok(())
}

async fn create(State(app): Shared, Body(req): Body<CreateSession>) -> Result<Json<Created>, ApiError> {
    let decls = parse_declarations(&req.decls).map_err(StepError::from)?;
    let session = Session::new(&decls, req.config.into())?.with_input(req.input);
    let id = app.fresh_id();
    let entry = Entry::new(session, unix_now());
    let out = {
        let s = entry.session.lock().await;
        app.persist(&id, &entry, &s)?;
        Created {
            session_id: id.clone(),
            graph: GraphDocument::from_graph(s.state()),
            reports: json::reports(&s.reports(s.state())),
        }
    };
    app.sessions.lock().unwrap().insert(id, entry);
    Ok(Json(out))
}

async fn delete(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    app.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn graph(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<GraphView>, ApiError> {
    let entry = app.lookup(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(GraphView {
        graph: GraphDocument::from_graph(s.state()),
        reports: json::reports(&s.reports(s.state())),
        history_length: s.history().len(),
    }))
}

async fn statements(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Body(req): Body<StatementBody>,
) -> Result<Json<StepResult>, ApiError> {
    let entry = app.lookup(&id)?;
    let mut s = entry.session.lock().await;
    precondition(&headers, &s)?;
    let step = StepDoc::from(s.step(&req.text)?);
    app.persist(&id, &entry, &s)?;
    Ok(Json(StepResult {
        step,
        history_length: s.history().len(),
    }))
}

async fn rules(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Vec<RuleInfo>>, ApiError> {
    let entry = app.lookup(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(
        s.catalog()
            .rules()
            .map(|r| RuleInfo {
                name: r.name.clone(),
                description: r.description.clone(),
                params: r.params.iter().map(|p| p.name.clone()).collect(),
            })
            .collect(),
    ))
}

async fn matches(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    Params(q): Params<MatchesQuery>,
) -> Result<Json<Vec<MatchDoc>>, ApiError> {
    let entry = app.lookup(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(s.what_if_matches(&q.rule)?.iter().map(MatchDoc::from).collect()))
}

async fn apply(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Body(req): Body<ApplyBody>,
) -> Result<Json<StepResult>, ApiError> {
    let entry = app.lookup(&id)?;
    let mut s = entry.session.lock().await;
    precondition(&headers, &s)?;
    let params = req.params.into_iter().map(|(k, v)| (k, v.into())).collect();
    let step = StepDoc::from(s.apply_what_if(&req.rule, req.match_index, &params)?);
    app.persist(&id, &entry, &s)?;
    Ok(Json(StepResult {
        step,
        history_length: s.history().len(),
    }))
}

async fn undo(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> Result<Json<StepResult>, ApiError> {
    let entry = app.lookup(&id)?;
    let mut s = entry.session.lock().await;
    precondition(&headers, &s)?;
    let undone = s.undo()?;
    let step = StepDoc::undo(&s, &undone);
    app.persist(&id, &entry, &s)?;
    Ok(Json(StepResult {
        step,
        history_length: s.history().len(),
    }))
}

async fn trace(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<TraceDocument>, ApiError> {
    let entry = app.lookup(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(TraceDocument::from_session(&s, None)))
}

async fn check(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    Body(req): Body<CheckBody>,
) -> Result<Json<VerdictDoc>, ApiError> {
    let entry = app.lookup(&id)?;
    let s = entry.session.lock().await;
    Ok(Json(VerdictDoc::from(&s.model_check(&req.formula)?)))
}

async fn openapi() -> impl IntoResponse {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], OPENAPI)
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(delete))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/statements", post(statements))
        .route("/sessions/{id}/rules", get(rules))
        .route("/sessions/{id}/matches", get(matches))
        .route("/sessions/{id}/apply", post(apply))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/check", post(check))
        .route("/openapi.json", get(openapi))
        .fallback(fallback)
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves until the process is stopped, evicting idle sessions in the
/// background.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    let app = AppState::new(config);
    let period = (app.config.ttl / 4).max(Duration::from_secs(1));
    let sweeper = app.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.evict(Instant::now());
        }
    });
    axum::serve(listener, router(app)).await
}
