//! HTTP API for live play.
//!
//! Sessions live in memory and expire after an idle period. Planner work
//! runs on the blocking thread pool; each session is locked while its agent
//! thinks, so concurrent requests to one session are serialised.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use trustgame_core::hierarchy::DEFAULT_BETA;
use trustgame_core::inference::ParameterGrid;
use trustgame_core::{AgentSpec, Level0Tables, ModelCache, PlannerConfig, Role};

use crate::session::{HumanAction, Session, SessionError, SessionFit, SessionView};

pub const DEFAULT_SESSION_BUDGET: u32 = 2000;
pub const DEFAULT_IDLE_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub default_simulations: u32,
    pub idle_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            default_simulations: DEFAULT_SESSION_BUDGET,
            idle_ttl: DEFAULT_IDLE_TTL,
        }
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    last_active: Instant,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    tables: Level0Tables,
    sessions: Mutex<HashMap<String, Entry>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let mut tables = Level0Tables::new();
        tables.prepare(DEFAULT_BETA);
        AppState {
            inner: Arc::new(Inner {
                config,
                tables,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut map = self.inner.sessions.lock().expect("session map poisoned");
        let ttl = self.inner.config.idle_ttl;
        match map.get_mut(id) {
            Some(e) if e.last_active.elapsed() <= ttl => {
                e.last_active = Instant::now();
                Ok(e.session.clone())
            }
            Some(_) => {
                map.remove(id);
                Err(ApiError::not_found(id))
            }
            None => Err(ApiError::not_found(id)),
        }
    }

    /// Drops sessions idle for longer than the configured period.
    pub fn expire_idle(&self) -> usize {
        let mut map = self.inner.sessions.lock().expect("session map poisoned");
        let ttl = self.inner.config.idle_ttl;
        let before = map.len();
        map.retain(|_, e| e.last_active.elapsed() <= ttl);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.inner.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Agent given either as a JSON spec or as a `role:k,alpha,P` string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum AgentInput {
    Spec(AgentSpec),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    pub human_role: Role,
    pub agent: AgentInput,
    /// Full planner settings; defaults to the service budget.
    #[serde(default)]
    pub planner: Option<PlannerConfig>,
    /// Shorthand overrides when `planner` is absent.
    #[serde(default)]
    pub simulations: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Debug, Serialize)]
struct ErrorDetail {
    code: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: format!("no session {id}"),
        }
    }

    fn validation(message: String) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "validation",
            message,
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            SessionError::IllegalAction(_) => (StatusCode::UNPROCESSABLE_ENTITY, "illegal_action"),
            SessionError::WrongTurn(_) => (StatusCode::CONFLICT, "wrong_turn"),
            SessionError::Closed => (StatusCode::CONFLICT, "closed"),
            SessionError::Incomplete => (StatusCode::CONFLICT, "incomplete"),
            SessionError::Planner(_) => (StatusCode::INTERNAL_SERVER_ERROR, "planner"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError {
            status: e.status(),
            code: "validation",
            message: e.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code,
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/actions", post(submit_action))
        .route("/sessions/{id}/fit", post(fit_session))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })?
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let agent = match req.agent {
        AgentInput::Spec(s) => s,
        AgentInput::Text(t) => t.parse().map_err(|e: trustgame_core::Error| ApiError::validation(e.to_string()))?,
    };
    let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let planner = match req.planner {
        Some(p) => p,
        None => PlannerConfig::with_simulations(req.simulations.unwrap_or(state.inner.config.default_simulations))
            .seeded(seed),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let st = state.clone();
    let view = blocking(move || {
        Session::check_setup(req.human_role, &agent, &planner)?;
        let cache = ModelCache::with_tables(planner, &st.inner.tables);
        let session = Session::start_with_cache(id.clone(), req.human_role, agent, cache)?;
        let view = session.view();
        st.inner.sessions.lock().expect("session map poisoned").insert(
            id,
            Entry {
                session: Arc::new(Mutex::new(session)),
                last_active: Instant::now(),
            },
        );
        Ok(view)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let s = state.get(&id)?;
    let view = s.lock().expect("session poisoned").view();
    Ok(Json(view))
}

async fn submit_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<HumanAction>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let Json(action) = body?;
    let s = state.get(&id)?;
    let view = blocking(move || {
        let mut g = s.lock().expect("session poisoned");
        g.submit(action)?;
        Ok(g.view())
    })
    .await?;
    Ok(Json(view))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResponse {
    #[serde(flatten)]
    pub session: SessionView,
    pub fit: SessionFit,
}

async fn fit_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<FitResponse>, ApiError> {
    let s = state.get(&id)?;
    let resp = blocking(move || {
        let g = s.lock().expect("session poisoned");
        let fit = g.fit(&ParameterGrid::full())?;
        Ok(FitResponse { session: g.view(), fit })
    })
    .await?;
    Ok(Json(resp))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state.get(&id)?;
    state.inner.sessions.lock().expect("session map poisoned").remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

/// Serves until ctrl-c, sweeping idle sessions once a minute.
pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.expire_idle();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
