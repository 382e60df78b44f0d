//! HTTP+JSON endpoints and the server-sent event stream.
//!
//! Each session is a [`Session`] behind a mutex plus a runner task that
//! advances it. Commands from handlers and periods from the runner both take
//! the lock, append to the log and publish on the session's broadcast
//! channel while still holding it, so subscribers see log order.

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, Weak};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use morse::env::N_OBJECTIVES;
use morse::risk::{FitnessMode, RiskEstimate};
use morse::store::ParetoArchive;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Notify};
use tokio::task::JoinHandle;

use crate::session::{
    Ack, Command, LoggedEntry, Session, SessionError, SessionOptions, SessionView, EVENT_SCHEMA_VERSION,
};

const CHANNEL_CAPACITY: usize = 4096;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(StatusCode, String),
    Unprocessable(String),
    Conflict(String),
    Internal(String),
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Finished(_) => ApiError::Conflict(e.to_string()),
            SessionError::Scenario(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.status(), r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(s, m) => (s, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub struct SessionHandle {
    pub id: String,
    pub archive_name: String,
    core: Mutex<Session>,
    tx: broadcast::Sender<LoggedEntry>,
    wake: Arc<Notify>,
    runner: Mutex<Option<JoinHandle<()>>>,
}

impl SessionHandle {
    fn lock(&self) -> std::sync::MutexGuard<'_, Session> {
        self.core.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Applies a command and publishes its log entry.
    pub fn command(&self, command: Command) -> Result<Ack, SessionError> {
        let ack = {
            let mut s = self.lock();
            let (ack, entry) = s.apply(command)?;
            let _ = self.tx.send(entry.clone());
            ack
        };
        self.wake.notify_one();
        Ok(ack)
    }

    pub fn view(&self) -> SessionView {
        self.lock().view()
    }

    /// Copy of the whole log and the view, taken atomically.
    pub fn snapshot(&self) -> Snapshot {
        let s = self.lock();
        Snapshot::of(&self.id, &s)
    }

    fn subscribe_with_snapshot(&self) -> (Snapshot, broadcast::Receiver<LoggedEntry>) {
        let s = self.lock();
        (Snapshot::of(&self.id, &s), self.tx.subscribe())
    }
}

impl Drop for SessionHandle {
    fn drop(&mut self) {
        if let Some(h) = self.runner.get_mut().ok().and_then(Option::take) {
            h.abort();
        }
    }
}

/// Simulation loop of one session. Holds only a weak reference so that a
/// deleted session is freed and its streams end.
async fn run_session(handle: Weak<SessionHandle>) {
    loop {
        let Some(h) = handle.upgrade() else { return };
        let delay = {
            let mut s = h.lock();
            if s.wants_step() {
                match s.advance() {
                    Ok(Some(entry)) => {
                        let _ = h.tx.send(entry.clone());
                    }
                    Ok(None) => {}
                    Err(_) => {
                        // stepping a validated archive policy cannot fail; stop
                        // rather than spin if it somehow does
                        let _ = s.apply(Command::Pause);
                    }
                }
                match s.mode() {
                    crate::session::RunMode::Running { speed } => Some(Duration::from_secs_f64(1.0 / speed)),
                    crate::session::RunMode::Paused => Some(Duration::ZERO),
                }
            } else {
                None
            }
        };
        match delay {
            Some(d) if d.is_zero() => tokio::task::yield_now().await,
            Some(d) => {
                tokio::select! {
                    _ = tokio::time::sleep(d) => {}
                    _ = h.wake.notified() => {}
                }
            }
            None => {
                let wake = h.wake.clone();
                drop(h);
                wake.notified().await;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Snapshot {
    pub schema_version: u32,
    pub id: String,
    pub session: SessionView,
    pub entries: Vec<LoggedEntry>,
}

impl Snapshot {
    fn of(id: &str, s: &Session) -> Self {
        Self {
            schema_version: EVENT_SCHEMA_VERSION,
            id: id.to_string(),
            session: s.view(),
            entries: s.log().to_vec(),
        }
    }
}

/// Message carried by each `entry` event of the stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Delta {
    pub schema_version: u32,
    #[serde(flatten)]
    pub entry: LoggedEntry,
}

/// Shared state of the service: named archives and live sessions.
pub struct AppState {
    archives: BTreeMap<String, Arc<ParetoArchive>>,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(archives: impl IntoIterator<Item = (String, ParetoArchive)>) -> Arc<Self> {
        Arc::new(Self {
            archives: archives.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn archive(&self, name: &str) -> Option<&Arc<ParetoArchive>> {
        self.archives.get(name)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id:?}")))
    }

    /// Creates a session and starts its runner. Must be called inside a
    /// tokio runtime.
    pub fn create_session(&self, archive_name: &str, options: SessionOptions) -> Result<Arc<SessionHandle>, ApiError> {
        let archive = self
            .archive(archive_name)
            .ok_or_else(|| ApiError::NotFound(format!("no archive {archive_name:?}")))?
            .clone();
        let session = Session::new(archive, options).map_err(|e| match e {
            SessionError::Scenario(e) => ApiError::Unprocessable(e.to_string()),
            e => e.into(),
        })?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        let handle = Arc::new(SessionHandle {
            id: id.clone(),
            archive_name: archive_name.to_string(),
            core: Mutex::new(session),
            tx,
            wake: Arc::new(Notify::new()),
            runner: Mutex::new(None),
        });
        let task = tokio::spawn(run_session(Arc::downgrade(&handle)));
        *handle.runner.lock().unwrap_or_else(|p| p.into_inner()) = Some(task);
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, handle.clone());
        Ok(handle)
    }

    pub fn remove_session(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).remove(id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/archives", get(list_archives))
        .route("/archives/{name}", get(get_archive))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/policies", get(session_policies))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/events", get(session_events))
        .route("/sessions/{id}/stream", get(session_stream))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": morse::VERSION, "schema_version": EVENT_SCHEMA_VERSION }))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchiveSummary {
    pub name: String,
    pub configuration: String,
    pub policies: usize,
    pub objectives: Vec<String>,
    pub fitness_mode: FitnessMode,
    pub seed: u64,
}

fn summary(name: &str, a: &ParetoArchive) -> ArchiveSummary {
    ArchiveSummary {
        name: name.to_string(),
        configuration: a.config.name.clone(),
        policies: a.len(),
        objectives: a.objectives.clone(),
        fitness_mode: a.fitness_mode,
        seed: a.seed,
    }
}

async fn list_archives(State(st): State<Arc<AppState>>) -> Json<Vec<ArchiveSummary>> {
    Json(st.archives.iter().map(|(k, a)| summary(k, a)).collect())
}

async fn get_archive(State(st): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult<PolicyList> {
    let a = st
        .archive(&name)
        .ok_or_else(|| ApiError::NotFound(format!("no archive {name:?}")))?;
    Ok(Json(PolicyList::of(a, None)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub archive: String,
    #[serde(flatten)]
    pub options: SessionOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionInfo {
    pub id: String,
    pub archive: String,
    #[serde(flatten)]
    pub view: SessionView,
}

fn info(h: &SessionHandle) -> SessionInfo {
    SessionInfo {
        id: h.id.clone(),
        archive: h.archive_name.clone(),
        view: h.view(),
    }
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    let Json(req) = body?;
    let h = st.create_session(&req.archive, req.options)?;
    Ok((StatusCode::CREATED, Json(info(&h))))
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> Json<Vec<SessionInfo>> {
    let handles: Vec<Arc<SessionHandle>> = st
        .sessions
        .read()
        .unwrap_or_else(|p| p.into_inner())
        .values()
        .cloned()
        .collect();
    let mut out: Vec<SessionInfo> = handles.iter().map(|h| info(h)).collect();
    out.sort_by(|a, b| (a.id.len(), &a.id).cmp(&(b.id.len(), &b.id)));
    Json(out)
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionInfo> {
    Ok(Json(info(&*st.session(&id)?)))
}

async fn delete_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    st.remove_session(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::NotFound(format!("no session {id:?}")))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyEntry {
    pub id: usize,
    pub fitness: Vec<f64>,
    /// Fitness min-max scaled to `[0, 1]` per objective over the archive;
    /// 0 for an objective on which all policies agree.
    pub normalized: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyList {
    pub objectives: Vec<String>,
    pub bounds: Vec<Bounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_policy: Option<usize>,
    pub policies: Vec<PolicyEntry>,
}

impl PolicyList {
    pub fn of(a: &ParetoArchive, active: Option<usize>) -> Self {
        let n = a.policies.first().map_or(N_OBJECTIVES, |p| p.fitness.len());
        let bounds: Vec<Bounds> = (0..n)
            .map(|j| {
                let col = a.policies.iter().map(|p| p.fitness[j]);
                Bounds {
                    min: col.clone().fold(f64::INFINITY, f64::min),
                    max: col.fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect();
        let policies = a
            .policies
            .iter()
            .map(|p| PolicyEntry {
                id: p.id,
                fitness: p.fitness.clone(),
                normalized: p
                    .fitness
                    .iter()
                    .zip(&bounds)
                    .map(|(v, b)| if b.max > b.min { (v - b.min) / (b.max - b.min) } else { 0.0 })
                    .collect(),
                risk: p.risk.clone(),
            })
            .collect();
        Self {
            objectives: a.objectives.clone(),
            bounds,
            active_policy: active,
            policies,
        }
    }
}

async fn session_policies(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<PolicyList> {
    let h = st.session(&id)?;
    let (archive, active) = {
        let s = h.lock();
        (s.archive().clone(), s.active_policy())
    };
    Ok(Json(PolicyList::of(&archive, Some(active))))
}

async fn post_command(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Command>, JsonRejection>,
) -> ApiResult<Ack> {
    let h = st.session(&id)?;
    let Json(cmd) = body?;
    Ok(Json(h.command(cmd)?))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EventsPage {
    pub schema_version: u32,
    pub entries: Vec<LoggedEntry>,
    /// Pass as `since` to continue.
    pub next: u64,
}

async fn session_events(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<EventsQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<EventsPage> {
    let h = st.session(&id)?;
    let Query(q) = q.map_err(|r| ApiError::BadRequest(r.status(), r.body_text()))?;
    let s = h.lock();
    Ok(Json(EventsPage {
        schema_version: EVENT_SCHEMA_VERSION,
        entries: s.entries_since(q.since).to_vec(),
        next: s.log().len() as u64,
    }))
}

fn snapshot_event(snap: &Snapshot) -> Event {
    let last = snap.entries.last().map(|e| e.seq.to_string());
    let ev = Event::default().event("snapshot");
    let ev = match last {
        Some(id) => ev.id(id),
        None => ev,
    };
    ev.json_data(snap).unwrap_or_else(|_| Event::default().event("error"))
}

fn delta_event(entry: LoggedEntry) -> Event {
    let id = entry.seq.to_string();
    let delta = Delta {
        schema_version: EVENT_SCHEMA_VERSION,
        entry,
    };
    Event::default()
        .event("entry")
        .id(id)
        .json_data(&delta)
        .unwrap_or_else(|_| Event::default().event("error"))
}

/// Snapshot first, then one `entry` event per new log entry. A subscriber
/// that falls behind the channel gets a fresh snapshot instead of a gap.
pub fn event_stream(handle: &Arc<SessionHandle>) -> impl Stream<Item = Result<Event, Infallible>> + Send + 'static {
    let (snap, rx) = handle.subscribe_with_snapshot();
    let weak = Arc::downgrade(handle);
    let first = stream::once(async move { Ok(snapshot_event(&snap)) });
    let rest = stream::unfold((rx, weak), |(mut rx, weak)| async move {
        match rx.recv().await {
            Ok(entry) => Some((Ok(delta_event(entry)), (rx, weak))),
            Err(broadcast::error::RecvError::Lagged(_)) => {
                let h = weak.upgrade()?;
                let (snap, rx) = h.subscribe_with_snapshot();
                drop(h);
                Some((Ok(snapshot_event(&snap)), (rx, weak)))
            }
            Err(broadcast::error::RecvError::Closed) => None,
        }
    });
    futures::StreamExt::chain(first, rest)
}

async fn session_stream(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let h = st.session(&id)?;
    Ok(Sse::new(event_stream(&h)).keep_alive(KeepAlive::default()))
}
