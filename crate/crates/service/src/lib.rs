//! HTTP/JSON front end for live interview sessions.
//!
//! Routes:
//! `POST /sessions`, `POST /sessions/{id}/utterances`,
//! `GET /sessions/{id}/transcript`, `GET /sessions`, `DELETE /sessions/{id}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use interviewkit::generator::{Decode, GeneratorModel};
use interviewkit::nn::ModelCheckpoint;
use interviewkit::session::{SessionError, SessionManager, SessionOptions, TurnResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

/// An error with its HTTP status.
#[derive(Debug)]
pub struct ServiceError {
    pub status: StatusCode,
    pub body: ApiError,
}

impl ServiceError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ServiceError { status, body: ApiError { code: code.to_string(), message: message.into() } }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.body.code, self.body.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::Ended(_) => (StatusCode::CONFLICT, "session_ended"),
            SessionError::EmptyText => (StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ServiceError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub checkpoint: PathBuf,
    pub decode: Decode,
    pub tau: f64,
    pub log_dir: Option<PathBuf>,
}

/// Loads the generator checkpoint named in `config`.
pub fn load_manager(config: &ServiceConfig) -> Result<SessionManager, ServiceError> {
    if !config.checkpoint.exists() {
        return Err(ServiceError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "checkpoint_missing",
            format!("no checkpoint at {}", config.checkpoint.display()),
        ));
    }
    let bad = |e: &dyn std::fmt::Display| ServiceError::new(StatusCode::SERVICE_UNAVAILABLE, "checkpoint_invalid", e.to_string());
    let ckpt = ModelCheckpoint::load(&config.checkpoint).map_err(|e| bad(&e))?;
    let model = GeneratorModel::from_checkpoint(&ckpt).map_err(|e| bad(&e))?;
    let mut manager = SessionManager::new(Arc::new(model), SessionOptions { decode: config.decode, tau: config.tau });
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir).map_err(|e| bad(&e))?;
        manager = manager.with_log_dir(dir);
    }
    Ok(manager)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub decode: Option<Decode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub first_turn: TurnResponse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostRequest {
    pub text: String,
}

type Shared = Arc<SessionManager>;

/// Runs CPU-bound session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, SessionError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ServiceError::from)
}

async fn create(State(m): State<Shared>, body: Option<Json<CreateRequest>>) -> Result<(StatusCode, Json<CreateResponse>), ServiceError> {
    let decode = body.and_then(|Json(b)| b.decode);
    let (id, first_turn) = blocking(move || m.create(decode)).await?;
    Ok((StatusCode::CREATED, Json(CreateResponse { id, first_turn })))
}

async fn post_utterance(State(m): State<Shared>, Path(id): Path<String>, Json(body): Json<PostRequest>) -> Result<Json<TurnResponse>, ServiceError> {
    Ok(Json(blocking(move || m.post(&id, &body.text)).await?))
}

async fn transcript(State(m): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(blocking(move || m.transcript(&id)).await?).into_response())
}

async fn list(State(m): State<Shared>) -> Response {
    Json(m.list()).into_response()
}

async fn delete(State(m): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ServiceError> {
    m.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/:id/utterances", post(post_utterance))
        .route("/sessions/:id/transcript", get(transcript))
        .route("/sessions/:id", axum::routing::delete(delete))
        .with_state(manager)
}

/// Binds `0.0.0.0:<port>` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let manager = Arc::new(load_manager(&config)?);
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(manager)).await?;
    Ok(())
}
