//! JSON prediction service.
//!
//! `POST /api/classify` and `POST /api/predict` take
//! `{"temperature", "ph", "ec", "do"}` as JSON numbers; `GET /api/health`
//! reports which models are loaded. Anything else is served from the UI
//! directory when one is configured.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use wqnet_core::data::{Sample, Task, FEATURE_NAMES};
use wqnet_core::models::{classify_sample, predict_wqi, ModelArtifact, ModelError};

use crate::artifact::load_artifact;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const ADDR_ENV: &str = "WQNET_ADDR";
pub const UI_DIR_ENV: &str = "WQNET_UI_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub class_index: u8,
    pub label: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub wqi: f64,
    pub label: String,
}

pub fn classify_response(artifact: &ModelArtifact, sample: &Sample) -> Result<ClassifyResponse, ModelError> {
    let (class, probabilities) = classify_sample(artifact, sample)?;
    Ok(ClassifyResponse { class_index: class.code(), label: class.label().to_string(), probabilities })
}

pub fn predict_response(artifact: &ModelArtifact, sample: &Sample) -> Result<PredictResponse, ModelError> {
    let (wqi, class) = predict_wqi(artifact, sample)?;
    Ok(PredictResponse { wqi, label: class.label().to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestError {
    InvalidJson,
    MissingField(&'static str),
    NotANumber(&'static str),
}

impl RequestError {
    pub fn body(&self) -> Value {
        match self {
            RequestError::InvalidJson => json!({ "error": "invalid_json" }),
            RequestError::MissingField(f) => json!({ "error": "missing_field", "field": f }),
            RequestError::NotANumber(f) => json!({ "error": "not_a_number", "field": f }),
        }
    }
}

/// Reads the four measurements from a JSON object. Unknown fields are
/// ignored; the first offending field in canonical order is reported.
pub fn parse_request(body: &[u8]) -> Result<Sample, RequestError> {
    let value: Value = serde_json::from_slice(body).map_err(|_| RequestError::InvalidJson)?;
    let obj = value.as_object().ok_or(RequestError::InvalidJson)?;
    let mut v = [0.0; 4];
    for (slot, name) in v.iter_mut().zip(FEATURE_NAMES) {
        let field = obj.get(name).ok_or(RequestError::MissingField(name))?;
        *slot = field.as_f64().filter(|x| x.is_finite()).ok_or(RequestError::NotANumber(name))?;
    }
    Ok(Sample::new(v[0], v[1], v[2], v[3]))
}

/// Loaded models, shared read-only by every request.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub classifier: Option<Arc<ModelArtifact>>,
    pub regressor: Option<Arc<ModelArtifact>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("at least one of the classifier and regressor paths is required")]
    NoModels,
    #[error("{path}: {source}")]
    Artifact { path: String, source: crate::artifact::ArtifactError },
    #[error("{path}: WrongTask: expected a {expected:?} artifact")]
    WrongTask { path: String, expected: Task },
    #[error("bad bind address `{0}`")]
    BadAddr(String),
}

impl AppState {
    pub fn new(classifier: Option<ModelArtifact>, regressor: Option<ModelArtifact>) -> Self {
        AppState { classifier: classifier.map(Arc::new), regressor: regressor.map(Arc::new) }
    }

    pub fn load(classifier: Option<&std::path::Path>, regressor: Option<&std::path::Path>) -> Result<Self, StartupError> {
        if classifier.is_none() && regressor.is_none() {
            return Err(StartupError::NoModels);
        }
        let load = |p: Option<&std::path::Path>, task: Task| -> Result<Option<ModelArtifact>, StartupError> {
            let Some(p) = p else { return Ok(None) };
            let path = p.display().to_string();
            let a = load_artifact(p).map_err(|source| StartupError::Artifact { path: path.clone(), source })?;
            if a.task != task {
                return Err(StartupError::WrongTask { path, expected: task });
            }
            Ok(Some(a))
        };
        Ok(AppState::new(load(classifier, Task::Classification)?, load(regressor, Task::Regression)?))
    }
}

fn error(status: StatusCode, body: Value) -> Response {
    (status, Json(body)).into_response()
}

fn unavailable() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "model_unavailable" }))
}

fn respond<T: Serialize>(model: Option<&Arc<ModelArtifact>>, body: &[u8], f: fn(&ModelArtifact, &Sample) -> Result<T, ModelError>) -> Response {
    let Some(model) = model else { return unavailable() };
    let sample = match parse_request(body) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body()),
    };
    match f(model, &sample) {
        Ok(r) => Json(r).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "prediction_failed", "detail": e.to_string() })),
    }
}

async fn handle_classify(State(state): State<AppState>, body: Bytes) -> Response {
    respond(state.classifier.as_ref(), &body, classify_response)
}

async fn handle_predict(State(state): State<AppState>, body: Bytes) -> Response {
    respond(state.regressor.as_ref(), &body, predict_response)
}

async fn handle_health(State(state): State<AppState>) -> Response {
    Json(json!({
        "status": "ok",
        "classifier_loaded": state.classifier.is_some(),
        "regressor_loaded": state.regressor.is_some(),
    }))
    .into_response()
}

const FALLBACK_PAGE: &str = "<!doctype html><meta charset=utf-8><title>wqnet</title>\
<h1>wqnet</h1><p>No UI directory configured. API: POST /api/classify, POST /api/predict, GET /api/health.</p>";

async fn api_not_found() -> Response {
    error(StatusCode::NOT_FOUND, json!({ "error": "not_found" }))
}

/// The API routes, with `ui_dir` (when given) served at `/`.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/classify", post(handle_classify))
        .route("/api/predict", post(handle_predict))
        .route("/api/health", get(handle_health))
        .route("/api/{*rest}", axum::routing::any(api_not_found))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(FALLBACK_PAGE) })),
    }
}

/// `--addr` if given, else `WQNET_ADDR`, else 127.0.0.1:8080.
pub fn resolve_addr(flag: Option<&str>) -> Result<SocketAddr, StartupError> {
    let raw = flag.map(str::to_string).or_else(|| std::env::var(ADDR_ENV).ok()).unwrap_or_else(|| DEFAULT_ADDR.to_string());
    raw.parse().map_err(|_| StartupError::BadAddr(raw))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// Binds and serves until Ctrl-C or SIGTERM; in-flight requests finish first.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let ui_dir = std::env::var_os(UI_DIR_ENV).map(PathBuf::from);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir)).with_graceful_shutdown(shutdown_signal()).await
}
