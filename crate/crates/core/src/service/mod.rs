//! HTTP facade over sessions, and transcript replay.
//!
//! Each session's state sits behind its own lock. Chat messages queue on a
//! second, fair lock so at most one agent pipeline runs per session; the
//! pipeline itself runs on a blocking thread without holding the state.

mod transcript;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::agents::{respond, AgentConfig, AgentError, CompletionBackend};
use crate::datapackage::Package;
use crate::grammar::Channel;
use crate::linking::{LinkError, SelectionPayload};
use crate::session::{
    apply_action, apply_chat, download, render, restore, snapshot, Action, Event, FilterChange, SessionError,
    SessionState, StateView,
};

pub use transcript::{
    load_transcript, replay, ChatStep, LoadedTranscript, ReplayReport, Step, StepReport, Transcript, TranscriptError,
    TRANSCRIPT_VERSION,
};

/// Machine-readable error body: `{code, message}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::StaleVersion { .. } => ApiError::new(StatusCode::CONFLICT, "StaleVersion", message),
            SessionError::UnknownViz(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownViz", message),
            SessionError::UnknownEntity(_) | SessionError::Selection(LinkError::UnknownEntity(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "UnknownEntity", message)
            }
            SessionError::Selection(LinkError::UnknownSelection(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "UnknownSelection", message)
            }
            SessionError::KindMismatch(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "KindMismatch", message),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidAction", message),
        }
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let message = e.to_string();
        match e {
            AgentError::BackendTimeout => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "BackendTimeout", message),
            AgentError::Backend(_) => ApiError::new(StatusCode::BAD_GATEWAY, "BackendFailure", message),
            AgentError::ScriptMiss { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ScriptMiss", message),
            AgentError::ContextTooLarge { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ContextTooLarge", message)
            }
            AgentError::SchemaViolation { .. } | AgentError::UnresolvableField { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation", message)
            }
        }
    }
}

struct Slot {
    package: Arc<Package>,
    state: Mutex<SessionState>,
    chat: tokio::sync::Mutex<()>,
}

/// Shared server state.
pub struct AppState {
    packages: BTreeMap<String, Arc<Package>>,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    backend: Arc<dyn CompletionBackend>,
    config: AgentConfig,
    data_dir: Option<PathBuf>,
}

impl AppState {
    /// Serve `packages`, persisting snapshots under `data_dir` when given
    /// and restoring any already there.
    pub fn new(
        packages: Vec<Package>,
        backend: Arc<dyn CompletionBackend>,
        config: AgentConfig,
        data_dir: Option<PathBuf>,
    ) -> std::io::Result<Arc<Self>> {
        let packages: BTreeMap<String, Arc<Package>> =
            packages.into_iter().map(|p| (p.name.clone(), Arc::new(p))).collect();
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for path in paths {
                let text = std::fs::read_to_string(&path)?;
                let name = serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v["state"]["package"].as_str().map(str::to_owned));
                let Some(package) = name.and_then(|n| packages.get(&n).cloned()) else {
                    tracing::warn!(path = %path.display(), "skipping snapshot for an unknown package");
                    continue;
                };
                match restore(&text, &package) {
                    Ok(state) => {
                        sessions.insert(
                            state.id.clone(),
                            Arc::new(Slot {
                                package,
                                state: Mutex::new(state),
                                chat: Default::default(),
                            }),
                        );
                    }
                    Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable snapshot"),
                }
            }
        }
        Ok(Arc::new(AppState {
            packages,
            sessions: Mutex::new(sessions),
            backend,
            config,
            data_dir,
        }))
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id}")))
    }

    fn persist(&self, state: &SessionState) -> Result<(), ApiError> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        let io = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Persistence", e.to_string());
        let tmp = dir.join(format!("{}.json.tmp", state.id));
        std::fs::write(&tmp, snapshot(state).to_json()).map_err(io)?;
        std::fs::rename(&tmp, dir.join(format!("{}.json", state.id))).map_err(io)
    }
}

/// Apply `f` to a session's state under its lock, persisting on success.
fn mutate(
    app: &AppState,
    slot: &Slot,
    f: impl FnOnce(&SessionState, &Package) -> Result<(SessionState, Vec<Event>), SessionError>,
) -> Result<Json<Mutation>, ApiError> {
    let mut guard = slot.state.lock().expect("session lock");
    let (next, events) = f(&guard, &slot.package)?;
    app.persist(&next)?;
    *guard = next;
    Ok(Json(Mutation {
        version: guard.version,
        events,
        state: render(&guard, &slot.package)?,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Mutation {
    pub version: u64,
    pub events: Vec<Event>,
    pub state: StateView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub version: u64,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Default, Deserialize)]
struct CreateBody {
    package: Option<String>,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Option<Json<CreateBody>>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let package = match body.package {
        Some(name) => app.packages.get(&name).cloned(),
        None if app.packages.len() == 1 => app.packages.values().next().cloned(),
        None => None,
    }
    .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownPackage", "name one of the served packages"))?;
    let state = SessionState::new(uuid::Uuid::new_v4().to_string(), &package);
    app.persist(&state)?;
    let created = Created {
        id: state.id.clone(),
        version: state.version,
        counts: state.counts(&package),
    };
    app.sessions.lock().expect("session map lock").insert(
        state.id.clone(),
        Arc::new(Slot {
            package,
            state: Mutex::new(state),
            chat: Default::default(),
        }),
    );
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<StateView>, ApiError> {
    let slot = app.slot(&id)?;
    let state = slot.state.lock().expect("session lock");
    Ok(Json(render(&state, &slot.package)?))
}

#[derive(Debug, Serialize)]
struct Counts {
    version: u64,
    counts: BTreeMap<String, usize>,
}

async fn get_counts(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Counts>, ApiError> {
    let slot = app.slot(&id)?;
    let state = slot.state.lock().expect("session lock");
    Ok(Json(Counts {
        version: state.version,
        counts: state.counts(&slot.package),
    }))
}

#[derive(Debug, Deserialize)]
struct ChatBody {
    text: String,
    version: Option<u64>,
}

async fn chat(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ChatBody>,
) -> Result<Json<Mutation>, ApiError> {
    let slot = app.slot(&id)?;
    let _turn = slot.chat.lock().await;
    let registry = {
        let state = slot.state.lock().expect("session lock");
        if let Some(v) = body.version {
            if v != state.version {
                return Err(SessionError::StaleVersion {
                    expected: v,
                    actual: state.version,
                }
                .into());
            }
        }
        state.registry.clone()
    };
    let (package, backend, config, text) = (slot.package.clone(), app.backend.clone(), app.config, body.text.clone());
    let output = tokio::task::spawn_blocking(move || respond(&text, &package, &registry, backend.as_ref(), &config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let turn = output.into_turn(&body.text);
    mutate(&app, &slot, |state, package| apply_chat(state, package, turn, None))
}

#[derive(Debug, Deserialize)]
struct FilterBody {
    version: u64,
    #[serde(flatten)]
    change: FilterChange,
}

async fn patch_filter(
    State(app): State<Arc<AppState>>,
    Path((id, name)): Path<(String, String)>,
    Json(body): Json<FilterBody>,
) -> Result<Json<Mutation>, ApiError> {
    let slot = app.slot(&id)?;
    let action = Action::AdjustFilter { name, change: body.change };
    mutate(&app, &slot, |s, p| apply_action(s, p, action, Some(body.version)))
}

#[derive(Debug, Deserialize)]
struct BrushBody {
    version: u64,
    #[serde(default)]
    payload: Option<SelectionPayload>,
}

async fn brush(
    State(app): State<Arc<AppState>>,
    Path((id, viz_id)): Path<(String, String)>,
    Json(body): Json<BrushBody>,
) -> Result<Json<Mutation>, ApiError> {
    let slot = app.slot(&id)?;
    let action = Action::Brush {
        viz_id,
        payload: body.payload,
    };
    mutate(&app, &slot, |s, p| apply_action(s, p, action, Some(body.version)))
}

#[derive(Debug, Deserialize)]
struct FieldBody {
    version: u64,
    channel: Channel,
    field: String,
}

async fn patch_fields(
    State(app): State<Arc<AppState>>,
    Path((id, viz_id)): Path<(String, String)>,
    Json(body): Json<FieldBody>,
) -> Result<Json<Mutation>, ApiError> {
    let slot = app.slot(&id)?;
    let action = Action::AdjustVizField {
        viz_id,
        channel: body.channel,
        field: body.field,
    };
    mutate(&app, &slot, |s, p| apply_action(s, p, action, Some(body.version)))
}

#[derive(Debug, Deserialize)]
struct VersionQuery {
    version: u64,
}

async fn dismiss(
    State(app): State<Arc<AppState>>,
    Path((id, viz_id)): Path<(String, String)>,
    Query(q): Query<VersionQuery>,
) -> Result<Json<Mutation>, ApiError> {
    let slot = app.slot(&id)?;
    mutate(&app, &slot, |s, p| apply_action(s, p, Action::DismissViz { viz_id }, Some(q.version)))
}

#[derive(Debug, Deserialize)]
struct DownloadQuery {
    entity: String,
}

async fn get_download(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<DownloadQuery>,
) -> Result<Response, ApiError> {
    let slot = app.slot(&id)?;
    let mut guard = slot.state.lock().expect("session lock");
    let bytes = download(&guard, &slot.package, &q.entity)?;
    let (next, _) = apply_action(&guard, &slot.package, Action::Download { entity: q.entity.clone() }, None)?;
    app.persist(&next)?;
    *guard = next;
    let disposition = format!("attachment; filename=\"{}.csv\"", q.entity);
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_owned()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

/// The HTTP API.
pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/counts", get(get_counts))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/filters/{name}", patch(patch_filter))
        .route("/sessions/{id}/viz/{viz_id}/brush", post(brush))
        .route("/sessions/{id}/viz/{viz_id}/fields", patch(patch_fields))
        .route("/sessions/{id}/viz/{viz_id}", delete(dismiss))
        .route("/sessions/{id}/download", get(get_download))
        .with_state(app)
}
