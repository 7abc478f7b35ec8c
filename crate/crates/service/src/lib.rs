//! HTTP service over sessions of the execution twin.
//!
//! | route | effect |
//! |---|---|
//! | `POST /sessions` | create from `{instance, plan?}`, or import `{log}` |
//! | `GET /sessions` | session ids |
//! | `GET /sessions/{id}/state` | current snapshot |
//! | `GET /sessions/{id}/plans/{n}` | plan `n` of the history, 0 = initial |
//! | `POST /sessions/{id}/advance` | `{to}` or `{by}` minutes |
//! | `POST /sessions/{id}/interventions` | `{narrative}` |
//! | `GET /sessions/{id}/events?since=&wait_ms=` | log tail, long-polling |
//! | `GET /sessions/{id}/log` | the event log as NDJSON |
//! | `GET /jobs/{id}` | result of a solve started with `wait: false` |
//! | `GET /ui/...` | static files from `ui_dir`, when set |
//!
//! Without a plan, session creation solves the instance off the request
//! path and answers 202 with a job id.

mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forecrew::model::{load_instance, PlanDocument};
use forecrew::narrative::{Extractor, HttpChatClient, LanguageModelClient};
use forecrew::twin::{TwinError, TwinState};
use forecrew::{build_program, solve, SolveLimits};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub use store::{Session, SessionStore, SessionView, StoreError};

pub const ENV_DATA_DIR: &str = "FORECREW_DATA_DIR";
pub const ENV_OFFLINE: &str = "FORECREW_OFFLINE";
pub const ENV_UI_DIR: &str = "FORECREW_UI_DIR";

/// Longest a `GET /events` request waits for news.
const MAX_WAIT: Duration = Duration::from_secs(60);

#[derive(Clone)]
pub struct ServiceConfig {
    /// `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
    /// Use the rule parser instead of the model for every intervention.
    pub offline: bool,
    pub model: Option<Arc<dyn LanguageModelClient>>,
    pub limits: SolveLimits,
    /// Static UI bundle served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { data_dir: None, offline: true, model: None, limits: SolveLimits::default(), ui_dir: None }
    }
}

impl ServiceConfig {
    /// Reads the data and UI directories, the offline flag and the model
    /// endpoint. Without an endpoint the service runs offline.
    pub fn from_env() -> Self {
        let offline = std::env::var(ENV_OFFLINE).is_ok_and(|v| !matches!(v.as_str(), "" | "0" | "false"));
        let model = if offline {
            None
        } else {
            match HttpChatClient::from_env(None) {
                Ok(client) => Some(Arc::new(client) as Arc<dyn LanguageModelClient>),
                Err(e) => {
                    tracing::warn!("{e}; interventions use the rule parser");
                    None
                }
            }
        };
        Self {
            data_dir: std::env::var_os(ENV_DATA_DIR).map(PathBuf::from),
            offline: offline || model.is_none(),
            model,
            limits: SolveLimits::default(),
            ui_dir: std::env::var_os(ENV_UI_DIR).map(PathBuf::from),
        }
    }

    fn extractor(&self, force_offline: bool) -> Extractor {
        match &self.model {
            Some(client) if !self.offline && !force_offline => Extractor::Model(client.clone()),
            _ => Extractor::Rules,
        }
    }

    fn limits(&self, seconds: Option<f64>) -> SolveLimits {
        match seconds {
            Some(s) if s > 0.0 => SolveLimits { time_budget: Duration::from_secs_f64(s), ..self.limits.clone() },
            _ => self.limits.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Job {
    Running,
    Done { status: u16, result: Value },
}

pub struct AppState {
    pub store: SessionStore,
    pub config: ServiceConfig,
    jobs: RwLock<HashMap<String, Job>>,
    next_job: AtomicU64,
}

impl AppState {
    /// Opens the data directory if one is configured.
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, StoreError> {
        let store = match &config.data_dir {
            Some(dir) => SessionStore::open(dir)?,
            None => SessionStore::in_memory(),
        };
        Ok(Arc::new(Self { store, config, jobs: RwLock::new(HashMap::new()), next_job: AtomicU64::new(1) }))
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.jobs.read().expect("job table").get(id).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        Self { status, body: json!({ "error": message.to_string() }) }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Twin(TwinError::ExtractionFailed { reason, diagnostics }) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": format!("extraction failed: {reason}"), "diagnostics": diagnostics }),
            },
            StoreError::Twin(e @ TwinError::ReplanInfeasible(_)) => Self::new(StatusCode::CONFLICT, e),
            StoreError::Twin(e) => Self::new(StatusCode::BAD_REQUEST, e),
            StoreError::Io(e) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, e),
        }
    }
}

impl From<TwinError> for ApiError {
    fn from(e: TwinError) -> Self {
        StoreError::Twin(e).into()
    }
}

type Reply = Result<(StatusCode, Json<Value>), ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/plans/{n}", get(get_plan))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/interventions", post(intervene))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/log", get(export_log))
        .route("/jobs/{id}", get(get_job));
    if let Some(dir) = &state.config.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(state, tokio::net::TcpListener::bind(addr).await?).await
}

pub async fn serve_on(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn session(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    state.store.get(id).ok_or_else(|| ApiError::not_found(&format!("session {id}")))
}

/// Runs blocking work either inline or as a polled job.
async fn run<F>(state: Arc<AppState>, wait: bool, work: F) -> Reply
where
    F: FnOnce(&AppState) -> Reply + Send + 'static,
{
    let finish = |r: Result<Reply, tokio::task::JoinError>| {
        r.unwrap_or_else(|e| Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e)))
    };
    if wait {
        let st = state.clone();
        return finish(tokio::task::spawn_blocking(move || work(&st)).await);
    }
    let id = format!("j{}", state.next_job.fetch_add(1, Ordering::SeqCst));
    state.jobs.write().expect("job table").insert(id.clone(), Job::Running);
    let job_id = id.clone();
    tokio::spawn(async move {
        let st = state.clone();
        let done = match finish(tokio::task::spawn_blocking(move || work(&st)).await) {
            Ok((status, Json(result))) => Job::Done { status: status.as_u16(), result },
            Err(e) => Job::Done { status: e.status.as_u16(), result: e.body },
        };
        state.jobs.write().expect("job table").insert(job_id, done);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job": id, "poll": format!("/jobs/{id}") }))))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    instance: Option<Value>,
    plan: Option<PlanDocument>,
    /// An exported NDJSON event log to import instead of an instance.
    log: Option<String>,
    time_limit_secs: Option<f64>,
    #[serde(default)]
    wait: bool,
}

fn created(state: &AppState, twin: TwinState) -> Reply {
    let session = state.store.insert(twin)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": session.id, "state": session.view().snapshot }))))
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Reply {
    if let Some(log) = req.log {
        let twin = TwinState::replay(&TwinState::parse_ndjson(&log)?)?;
        return created(&state, twin);
    }
    let doc = req.instance.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "either `instance` or `log` is required"))?;
    let instance = load_instance(doc.to_string().as_bytes()).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    if let Some(plan) = req.plan {
        let plan = plan.into_plan().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
        return created(&state, TwinState::init(&instance, &plan)?);
    }
    let limits = state.config.limits(req.time_limit_secs);
    run(state, req.wait, move |st| {
        let program = build_program(&instance).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
        let (plan, _) = solve(&program, &limits).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
        if !plan.status.is_feasible() {
            return Err(ApiError::new(StatusCode::CONFLICT, "no feasible plan found within the limits"));
        }
        created(st, TwinState::init(&instance, &plan)?)
    })
    .await
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "sessions": state.store.ids() }))
}

async fn get_state(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(json!(session(&state, &id)?.view().snapshot)))
}

async fn get_plan(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, usize)>,
) -> Result<Json<PlanDocument>, ApiError> {
    let view = session(&state, &id)?.view();
    view.plans.get(n).cloned().map(Json).ok_or_else(|| ApiError::not_found(&format!("plan {n}")))
}

#[derive(Debug, Deserialize)]
struct AdvanceRequest {
    to: Option<i64>,
    by: Option<i64>,
}

async fn advance(State(state): State<Arc<AppState>>, Path(id): Path<String>, Json(req): Json<AdvanceRequest>) -> Reply {
    let session = session(&state, &id)?;
    let to = match (req.to, req.by) {
        (Some(to), None) => to,
        (None, Some(by)) => session.view().snapshot.clock + by,
        _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "give exactly one of `to` and `by`")),
    };
    run(state, true, move |_| Ok((StatusCode::OK, Json(json!(session.advance(to)?))))).await
}

#[derive(Debug, Deserialize)]
struct InterventionRequest {
    narrative: String,
    #[serde(default)]
    offline: bool,
    time_limit_secs: Option<f64>,
    #[serde(default = "default_wait")]
    wait: bool,
}

fn default_wait() -> bool {
    true
}

async fn intervene(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<InterventionRequest>,
) -> Reply {
    let session = session(&state, &id)?;
    let extractor = state.config.extractor(req.offline);
    let limits = state.config.limits(req.time_limit_secs);
    run(state, req.wait, move |_| {
        let report = session.intervene(&req.narrative, &extractor, &limits)?;
        let mut body = json!(report);
        body["makespan_change"] = json!(report.makespan_after - report.makespan_before);
        Ok((StatusCode::OK, Json(body)))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: usize,
    #[serde(default)]
    wait_ms: u64,
}

/// Events with `seq >= since`. With `wait_ms` the request is held until
/// a new event arrives or the wait runs out.
async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Json<Value>, ApiError> {
    let session = session(&state, &id)?;
    let mut rx = session.subscribe();
    if q.wait_ms > 0 && session.view().events.len() <= q.since {
        let wait = Duration::from_millis(q.wait_ms).min(MAX_WAIT);
        let _ = tokio::time::timeout(wait, rx.wait_for(|n| *n > q.since)).await;
    }
    let view = session.view();
    let tail = view.events.get(q.since..).unwrap_or_default();
    Ok(Json(json!({ "events": tail, "next": view.events.len() })))
}

async fn export_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = session(&state, &id)?.view();
    let text: String = view.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect();
    Ok(([("content-type", "application/x-ndjson")], text).into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    state.job(&id).map(Json).ok_or_else(|| ApiError::not_found(&format!("job {id}")))
}
