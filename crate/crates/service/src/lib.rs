//! HTTP service for conducting a dose-escalation trial.
//!
//! A session holds one analysis (animal co-data, co-data trials and the
//! active trial) with a seed fixed at creation. Cohort submissions refit the
//! model off the async runtime and replace the session snapshot atomically;
//! a submission that arrives while another is being fitted gets
//! `409 Conflict` with `Retry-After`. Cohorts away from the recommended dose
//! need an explicit override, which is logged. The decision log is append-only and
//! replaying it reconstructs the session.

mod session;

use std::sync::{Arc, RwLock};

use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use exnex_core::model::Cohort;
use exnex_core::Error as CoreError;

pub use session::{
    CreateTrial, DecisionLog, Defaults, LogEntry, LogEvent, Session, SubmitCohort, WhatIf,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown trial session {0}")]
    NotFound(String),
    #[error("session {0} is processing another request; retry shortly")]
    Busy(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::State(m) => ServiceError::Conflict(m),
            CoreError::Config(_)
            | CoreError::InvalidData(_)
            | CoreError::Parse { .. }
            | CoreError::Domain(_) => ServiceError::Invalid(e.to_string()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    retry: bool,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Busy(_) | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let retry = matches!(self, ServiceError::Busy(_));
        let mut resp = (
            status,
            Json(ErrorBody {
                error: self.to_string(),
                retry,
            }),
        )
            .into_response();
        if retry {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from_static("1"));
        }
        resp
    }
}

/// A session snapshot plus the lock that serialises its writers.
struct Slot {
    writer: Mutex<()>,
    current: RwLock<Arc<Session>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<Session> {
        self.current.read().expect("session lock poisoned").clone()
    }
}

struct AppState {
    defaults: Defaults,
    token: Option<String>,
    sessions: DashMap<String, Arc<Slot>>,
}

#[derive(Clone)]
pub struct Service(Arc<AppState>);

impl Service {
    pub fn new(defaults: Defaults, token: Option<String>) -> Self {
        Service(Arc::new(AppState {
            defaults,
            token,
            sessions: DashMap::new(),
        }))
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/v1/trials", post(create_trial))
            .route("/v1/trials/replay", post(replay_trial))
            .route("/v1/trials/{id}/cohorts", post(add_cohort))
            .route("/v1/trials/{id}/posterior", get(get_posterior))
            .route("/v1/trials/{id}/recommendation", get(get_recommendation))
            .route("/v1/trials/{id}/what-if", post(what_if))
            .route("/v1/trials/{id}/log", get(get_log))
            .layer(middleware::from_fn_with_state(self.clone(), authorize))
            .with_state(self.clone())
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.0
            .sessions
            .get(id)
            .map(|s| s.clone())
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn insert(&self, session: Session) -> String {
        let id = session.id.clone();
        self.0.sessions.insert(
            id.clone(),
            Arc::new(Slot {
                writer: Mutex::new(()),
                current: RwLock::new(Arc::new(session)),
            }),
        );
        id
    }
}

async fn authorize(
    State(svc): State<Service>,
    req: Request,
    next: Next,
) -> Result<Response, ServiceError> {
    if let Some(token) = &svc.0.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return Err(ServiceError::Unauthorized);
        }
    }
    Ok(next.run(req).await)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, CoreError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
        .map_err(ServiceError::from)
}

#[derive(Serialize)]
struct Created {
    id: String,
    seed: u64,
    recommendation: serde_json::Value,
}

fn created(session: &Session) -> Result<Created, ServiceError> {
    Ok(Created {
        id: session.id.clone(),
        seed: session.seed,
        recommendation: serde_json::to_value(&session.recommendation)
            .map_err(|e| ServiceError::Internal(e.to_string()))?,
    })
}

async fn create_trial(
    State(svc): State<Service>,
    Json(req): Json<CreateTrial>,
) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let defaults = svc.0.defaults.clone();
    let id = uuid::Uuid::new_v4().to_string();
    let session = blocking(move || Session::create(id, &defaults, req)).await?;
    let body = created(&session)?;
    svc.insert(session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn replay_trial(
    State(svc): State<Service>,
    Json(log): Json<DecisionLog>,
) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let defaults = svc.0.defaults.clone();
    let id = uuid::Uuid::new_v4().to_string();
    let session = blocking(move || Session::replay(id, &defaults, &log)).await?;
    let body = created(&session)?;
    svc.insert(session);
    Ok((StatusCode::CREATED, Json(body)))
}

fn raw_json(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn add_cohort(
    State(svc): State<Service>,
    Path(id): Path<String>,
    Json(submit): Json<SubmitCohort>,
) -> Result<Response, ServiceError> {
    let slot = svc.slot(&id)?;
    let _writer = slot
        .writer
        .try_lock()
        .map_err(|_| ServiceError::Busy(id.clone()))?;
    let current = slot.snapshot();
    let next = blocking(move || current.add_cohort(submit)).await?;
    let body = next.recommendation_json.clone();
    *slot.current.write().expect("session lock poisoned") = Arc::new(next);
    Ok(raw_json(body))
}

async fn get_posterior(
    State(svc): State<Service>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let s = svc.slot(&id)?.snapshot();
    Ok(Json(s.posterior.clone()).into_response())
}

async fn get_recommendation(
    State(svc): State<Service>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let s = svc.slot(&id)?.snapshot();
    Ok(raw_json(s.recommendation_json.clone()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    cohorts: Vec<Cohort>,
}

async fn what_if(
    State(svc): State<Service>,
    Path(id): Path<String>,
    Json(req): Json<WhatIfRequest>,
) -> Result<Json<WhatIf>, ServiceError> {
    let s = svc.slot(&id)?.snapshot();
    Ok(Json(blocking(move || s.what_if(&req.cohorts)).await?))
}

async fn get_log(
    State(svc): State<Service>,
    Path(id): Path<String>,
) -> Result<Json<DecisionLog>, ServiceError> {
    Ok(Json(svc.slot(&id)?.snapshot().decision_log()))
}

/// Serves until interrupted.
pub async fn serve(service: Service, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
