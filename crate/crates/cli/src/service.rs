//! JSON-over-HTTP API under `/v1`, plus the bare scoring endpoint used by
//! `serve-scorer`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use framefill_core::constraints::ConstraintMode;
use framefill_core::engine::{Engine, EngineError};
use framefill_core::scorer::{ScoreRequest, ScoreResponse, Scorer};
use framefill_core::session::{SessionAction, SessionState};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e.code() {
            "unknown_frame" => StatusCode::NOT_FOUND,
            "search_failed" => StatusCode::UNPROCESSABLE_ENTITY,
            "scorer_unavailable" => StatusCode::SERVICE_UNAVAILABLE,
            "scorer_error" => StatusCode::BAD_GATEWAY,
            "no_suggestion_model" => StatusCode::NOT_IMPLEMENTED,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a body ourselves so malformed JSON gets the structured error too.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

/// Session JSON files, one per id, with one writer at a time per id.
pub struct SessionStore {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    counter: AtomicU64,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionStore {
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    fn lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn path(&self, id: &str) -> Result<PathBuf, ApiError> {
        let ok = !id.is_empty()
            && id.len() <= 64
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_session_id",
                format!("bad session id {id:?}"),
            ));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    fn read(&self, id: &str) -> Result<SessionState, ApiError> {
        let path = self.path(id)?;
        let text = std::fs::read_to_string(&path).map_err(|_| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_session",
                format!("no session {id:?}"),
            )
        })?;
        SessionState::import(&text).map_err(ApiError::internal)
    }

    fn write(&self, state: &SessionState) -> Result<(), ApiError> {
        let path = self.path(&state.id)?;
        std::fs::create_dir_all(&self.dir).map_err(ApiError::internal)?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, state.export()).map_err(ApiError::internal)?;
        std::fs::rename(&tmp, &path).map_err(ApiError::internal)
    }

    fn fresh_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos());
        format!("s{t:x}-{n}")
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub sessions: Arc<SessionStore>,
}

pub fn router(engine: Arc<Engine>, session_dir: impl Into<PathBuf>) -> Router {
    let state = AppState {
        engine,
        sessions: Arc::new(SessionStore::new(session_dir)),
    };
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/frames", get(frames))
        .route("/infill", post(infill))
        .route("/suggest", post(suggest))
        .route("/diversify", post(diversify))
        .route("/counterfactual", post(counterfactual))
        .route("/suite", post(suite))
        .route("/plan", post(plan))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).put(put_session))
        .route("/sessions/{id}/actions", post(session_action))
        .route("/sessions/{id}/replay", post(replay_session))
        .with_state(state);
    Router::new().nest("/v1", v1).fallback(|| async {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    })
}

/// Runs engine work off the async threads.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, ApiError> + Send + 'static,
{
    let engine = state.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(ApiError::internal)?
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "frames": state.engine.lexicon().frames().len(),
        "vocab_size": state.engine.vocab().len(),
    }))
}

#[derive(Deserialize)]
struct FrameQuery {
    #[serde(default)]
    q: String,
}

async fn frames(
    State(state): State<AppState>,
    Query(q): Query<FrameQuery>,
) -> Json<serde_json::Value> {
    Json(json!({ "frames": state.engine.search_frames(&q.q) }))
}

macro_rules! engine_endpoint {
    ($name:ident, $method:ident) => {
        async fn $name(State(state): State<AppState>, body: Bytes) -> Response {
            let run = async {
                let request = parse(&body)?;
                blocking(&state, move |e| Ok(e.$method(&request)?)).await
            };
            match run.await {
                Ok(out) => Json(out).into_response(),
                Err(e) => e.into_response(),
            }
        }
    };
}

engine_endpoint!(infill, infill);
engine_endpoint!(suggest, suggest);
engine_endpoint!(diversify, diversify);
engine_endpoint!(counterfactual, counterfactual);

#[derive(Deserialize)]
struct SuiteRequest {
    frames: Vec<String>,
    #[serde(default)]
    mode: ConstraintMode,
}

async fn suite(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<framefill_core::constraints::SuiteDump> {
    let r: SuiteRequest = parse(&body)?;
    Ok(Json(state.engine.suite_dump(&r.frames, r.mode)?))
}

#[derive(Deserialize)]
struct PlanRequest {
    frames: Vec<String>,
    #[serde(default = "default_budget")]
    k: usize,
}

fn default_budget() -> usize {
    8
}

async fn plan(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<framefill_core::diversifier::PlanDump> {
    let r: PlanRequest = parse(&body)?;
    Ok(Json(state.engine.subset_plan(&r.frames, r.k)?))
}

#[derive(Deserialize, Default)]
struct CreateSession {
    id: Option<String>,
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionState>), ApiError> {
    let r: CreateSession = if body.is_empty() {
        CreateSession::default()
    } else {
        parse(&body)?
    };
    let id = r.id.unwrap_or_else(|| state.sessions.fresh_id());
    let lock = state.sessions.lock(&id);
    let _guard = lock.lock().await;
    if state.sessions.path(&id)?.exists() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_exists",
            format!("session {id:?} exists"),
        ));
    }
    let session = SessionState::new(id);
    state.sessions.write(&session)?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<SessionState> {
    Ok(Json(state.sessions.read(&id)?))
}

/// Imports an exported session under `id`.
async fn put_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<SessionState> {
    let mut session: SessionState = parse(&body)?;
    session.id = id.clone();
    let lock = state.sessions.lock(&id);
    let _guard = lock.lock().await;
    state.sessions.write(&session)?;
    Ok(Json(session))
}

#[derive(Serialize)]
struct ActionResponse {
    event: framefill_core::session::SessionEvent,
    state: SessionState,
}

async fn session_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<ActionResponse> {
    let action: SessionAction = parse(&body)?;
    let lock = state.sessions.lock(&id);
    let _guard = lock.lock().await;
    let mut session = state.sessions.read(&id)?;
    let (session, event) = blocking(&state, move |e| {
        let event = session.apply(e, action)?.clone();
        Ok((session, event))
    })
    .await?;
    state.sessions.write(&session)?;
    Ok(Json(ActionResponse {
        event,
        state: session,
    }))
}

#[derive(Serialize)]
struct ReplayResponse {
    identical: bool,
    state: SessionState,
}

/// Re-runs a session's history and reports whether it reproduces.
async fn replay_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<ReplayResponse> {
    let session = state.sessions.read(&id)?;
    let replayed = blocking(&state, move |e| {
        let r = session.replay(e)?;
        Ok((r.clone(), r == session))
    })
    .await?;
    Ok(Json(ReplayResponse {
        identical: replayed.1,
        state: replayed.0,
    }))
}

/// `POST /score` over a local scorer, the protocol `RemoteScorer` speaks.
pub fn scorer_router(scorer: Arc<dyn Scorer>) -> Router {
    Router::new().route(
        "/score",
        post(move |body: Bytes| {
            let scorer = scorer.clone();
            async move {
                let r: ScoreRequest = parse(&body)?;
                if let Some(&t) = r
                    .prefix
                    .iter()
                    .find(|&&t| t as usize >= scorer.vocab_size())
                {
                    return Err(ApiError::new(
                        StatusCode::BAD_REQUEST,
                        "invalid_request",
                        format!("token {t} out of range"),
                    ));
                }
                let logprobs = tokio::task::spawn_blocking(move || scorer.next_logprobs(&r.prefix))
                    .await
                    .map_err(ApiError::internal)?
                    .map_err(|e| {
                        ApiError::new(
                            StatusCode::INTERNAL_SERVER_ERROR,
                            "scorer_error",
                            e.to_string(),
                        )
                    })?;
                Ok::<_, ApiError>(Json(ScoreResponse { logprobs }))
            }
        }),
    )
}
