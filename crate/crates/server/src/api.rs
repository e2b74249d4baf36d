//! REST session service.

use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use epicontrol::control::{prepare, PlannerKind, RunConfig};
use epicontrol::session::{Session, StepChoice};
use epicontrol::Error;

use crate::Overrides;

/// JSON error body `{code, message}` with a matching status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::InvalidAction(_) => (StatusCode::BAD_REQUEST, "invalid_action"),
            Error::InvalidParams(_)
            | Error::InvalidConfig(_)
            | Error::LengthMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::MalformedStream { .. }
            | Error::DateMisalignment(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            Error::MissingFile(_) | Error::Parse { .. } | Error::Csv(_) => (StatusCode::BAD_REQUEST, "invalid_data"),
            Error::Json(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::WrongStatus(_) => (StatusCode::CONFLICT, "wrong_status"),
            Error::Degenerate { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "inference_failed"),
            Error::Checkpoint(_) | Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// `POST /sessions` body; every field is optional. `config` replaces the
/// server's base config, `preset` picks a named one.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub preset: Option<String>,
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    pub planner: Option<PlannerKind>,
    pub kappa_soec: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub action: StepChoice,
}

#[derive(Debug, Deserialize)]
pub struct WhatIfQuery {
    pub draws: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TableView<'a> {
    bins: epicontrol::qlearn::BinScheme,
    table: &'a epicontrol::qlearn::QTable,
}

type Shared = Arc<RwLock<Session>>;

struct Inner {
    base: RunConfig,
    sessions: Mutex<HashMap<String, Shared>>,
    next: AtomicU64,
    state_dir: Option<PathBuf>,
}

/// Sessions by id, plus the config new sessions start from. With a state
/// directory every session is written there after each change and
/// reloaded on start-up.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(base: RunConfig, state_dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut sessions = HashMap::new();
        let mut next = 1;
        if let Some(dir) = &state_dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let s = Session::load(&path)?;
                    if let Some(n) = s.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                        next = next.max(n + 1);
                    }
                    log::info!("restored session {} from {}", s.id, path.display());
                    sessions.insert(s.id.clone(), Arc::new(RwLock::new(s)));
                }
            }
        }
        Ok(AppState(Arc::new(Inner { base, sessions: Mutex::new(sessions), next: AtomicU64::new(next), state_dir })))
    }

    fn find(&self, id: &str) -> ApiResult<Shared> {
        self.0
            .sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("no session '{id}'")).into())
    }
}

fn persist(dir: Option<&FsPath>, s: &Session) -> epicontrol::Result<()> {
    match dir {
        Some(dir) => s.save(&dir.join(format!("{}.json", s.id))),
        None => Ok(()),
    }
}

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateSession = parse_body(&body)?;
    let mut cfg = match (req.config, req.preset) {
        (Some(cfg), _) => cfg,
        (None, Some(name)) => RunConfig::preset(&name)?,
        (None, None) => app.0.base.clone(),
    };
    Overrides { seed: req.seed, planner: req.planner, kappa_soec: req.kappa_soec }.apply(&mut cfg);
    cfg.validate()?;
    let id = format!("s{}", app.0.next.fetch_add(1, Ordering::SeqCst));
    let dir = app.0.state_dir.clone();
    let session = blocking(move || {
        let prepared = prepare(&cfg)?;
        let s = Session::create(id, &cfg, &prepared.generator, &prepared.context, None)?;
        persist(dir.as_deref(), &s)?;
        Ok(s)
    })
    .await?;
    let view = session.view();
    log::info!("created session {} ({} planner)", view.id, view.planner);
    app.0.sessions.lock().expect("session map poisoned").insert(view.id.clone(), Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn show(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = app.find(&id)?;
    let view = s.read().await.view();
    Ok(Json(view))
}

async fn step(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: StepRequest = parse_required(&body)?;
    let guard = app.find(&id)?.write_owned().await;
    let dir = app.0.state_dir.clone();
    let view = blocking(move || {
        let mut s = guard;
        s.step(req.action)?;
        persist(dir.as_deref(), &s)?;
        Ok(s.view())
    })
    .await?;
    Ok(Json(view))
}

async fn whatif(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WhatIfQuery>,
) -> ApiResult<impl IntoResponse> {
    let guard = app.find(&id)?.read_owned().await;
    let forecast = blocking(move || Ok(guard.whatif(q.draws)?)).await?;
    Ok(Json(forecast))
}

async fn qtable(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = app.find(&id)?;
    let s = s.read().await;
    let table = s
        .q_table()
        .ok_or_else(|| Error::NotFound(format!("the {} planner keeps no Q-table", s.config().planner)))?;
    let bins = s.config().qlearn.bin_scheme()?;
    Ok(Json(TableView { bins, table }).into_response())
}

async fn healthz() -> impl IntoResponse {
    Json(json!({ "status": "ok" }))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/whatif", get(whatif))
        .route("/sessions/{id}/qtable", get(qtable))
        .fallback(fallback)
        .with_state(app)
}
