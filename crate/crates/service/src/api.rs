//! Request handlers and the job worker loop.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc::error::TrySendError;
use tokio::sync::{mpsc, Mutex};

use stylesteer::backends::LossTerms;
use stylesteer::imageio::{decode_png, encode_png, BitDepth};
use stylesteer::manipulator::{apply, ManipulationRequest, StyleSource};
use stylesteer::optimizer::{
    find_direction_with, find_single_channel_direction_with, OptimizeConfig, Progress, SearchMode, SearchOptions,
};
use stylesteer::store::{ListFilter, RecordMeta};
use stylesteer::style_space::PromptSpec;
use stylesteer::{Error, ErrorKind};

use crate::jobs::{JobError, JobOutcome};
use crate::AppState;

/// An HTTP status with a JSON error body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "usage", message)
    }

    fn unsupported_image(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::FingerprintMismatch { .. } => StatusCode::CONFLICT,
            Error::Capability(_) => StatusCode::NOT_IMPLEMENTED,
            _ => match e.kind() {
                ErrorKind::Usage => StatusCode::BAD_REQUEST,
                ErrorKind::NotFound => StatusCode::NOT_FOUND,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        };
        ApiError::new(status, e.kind().as_str(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            return ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", r.body_text());
        }
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"kind": self.kind, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking backend work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

pub async fn backend_info(State(state): State<AppState>) -> Json<serde_json::Value> {
    let b = &state.bundle;
    let layout = b.layout();
    Json(json!({
        "name": b.name(),
        "fingerprint": b.fingerprint(),
        "layout": layout.model(),
        "total_channels": layout.total_channels(),
        "resolutions": layout.resolutions().collect::<Vec<_>>(),
        "max_resolution": layout.max_resolution(),
        "differentiable": b.differentiable(),
        "has_inverter": b.inverter().is_ok(),
        "default_config": OptimizeConfig::for_layout(layout),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitBody {
    pub prompt: String,
    /// Neutral prompt; selects single-channel search.
    #[serde(default)]
    pub negative: Option<String>,
    /// Partial [`OptimizeConfig`]; absent fields take the backend defaults.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

fn resolve_submission(state: &AppState, body: &SubmitBody) -> ApiResult<(PromptSpec, OptimizeConfig)> {
    let layout = state.bundle.layout();
    let mut overrides = body.config.clone().unwrap_or_else(|| json!({}));
    let explicit_mode = overrides.get("mode").is_some();
    if body.negative.is_some() && !explicit_mode {
        if let Some(obj) = overrides.as_object_mut() {
            obj.insert("mode".into(), json!("single_channel"));
        }
    }
    let config = OptimizeConfig::for_layout(layout).overlay(&overrides)?;
    config.validate(layout)?;
    state.bundle.require_differentiable()?;
    state.bundle.embedder.embed_text(&body.prompt)?;
    let prompt = match (&body.negative, config.mode) {
        (None, SearchMode::MultiChannel) => PromptSpec::single(body.prompt.clone()),
        (Some(neg), SearchMode::SingleChannel) => {
            state.bundle.embedder.embed_text(neg)?;
            PromptSpec::contrastive(body.prompt.clone(), neg.clone())
        }
        (None, SearchMode::SingleChannel) => {
            return Err(ApiError::bad_request("single_channel mode needs a negative prompt"))
        }
        (Some(_), SearchMode::MultiChannel) => {
            return Err(ApiError::bad_request("a negative prompt needs single_channel mode"))
        }
    };
    Ok((prompt, config))
}

pub async fn submit(
    State(state): State<AppState>,
    body: Result<Json<SubmitBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let Json(body) = body?;
    let (prompt, config) = resolve_submission(&state, &body)?;
    let id = state.jobs.create(prompt, config);
    match state.queue.try_send(id.clone()) {
        Ok(()) => Ok((StatusCode::ACCEPTED, Json(json!({"job_id": id})))),
        Err(TrySendError::Full(_)) => {
            state.jobs.discard(&id);
            Err(ApiError::new(StatusCode::CONFLICT, "busy", "job queue is full; retry later"))
        }
        Err(TrySendError::Closed(_)) => {
            state.jobs.discard(&id);
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "job workers have stopped"))
        }
    }
}

pub async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<crate::Job>> {
    state
        .jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("job {id}")))
}

pub async fn list_jobs(State(state): State<AppState>) -> Json<Vec<crate::Job>> {
    Json(state.jobs.all())
}

#[derive(Debug, Deserialize)]
pub struct ListQuery {
    pub prompt: Option<String>,
    pub fingerprint: Option<String>,
}

pub async fn list_directions(
    State(state): State<AppState>,
    Query(q): Query<ListQuery>,
) -> ApiResult<Json<Vec<RecordMeta>>> {
    let store = state.store.clone();
    blocking(move || {
        let filter = ListFilter {
            prompt: q.prompt,
            fingerprint: q.fingerprint,
        };
        Ok(Json(store.list_directions(&filter)?))
    })
    .await
}

#[derive(Debug, Serialize)]
pub struct DirectionView {
    #[serde(flatten)]
    pub meta: RecordMeta,
    pub hyperparams: OptimizeConfig,
    pub trace: Vec<LossTerms>,
    pub selected_channel: Option<usize>,
}

pub async fn get_direction(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DirectionView>> {
    let store = state.store.clone();
    blocking(move || {
        let meta = store.describe(&id)?;
        let record = store.load_direction(&id)?;
        Ok(Json(DirectionView {
            meta,
            hyperparams: record.direction.hyperparams,
            trace: record.report.trace,
            selected_channel: record.report.selected_channel,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulateBody {
    pub direction_id: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Base64 PNG.
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub resolution: Option<u32>,
}

/// Query parameters when the body is a raw PNG upload.
#[derive(Debug, Deserialize)]
pub struct ManipulateQuery {
    pub direction_id: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub resolution: Option<u32>,
}

enum Source {
    Seed(u64),
    Png(Vec<u8>),
}

fn content_type(headers: &HeaderMap) -> String {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

pub async fn manipulate(
    State(state): State<AppState>,
    headers: HeaderMap,
    query: Result<Query<ManipulateQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<Response> {
    let (direction_id, alpha, resolution, source) = match content_type(&headers).as_str() {
        "application/json" => {
            let b: ManipulateBody =
                serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?;
            let source = match (b.seed, b.image) {
                (Some(seed), None) => Source::Seed(seed),
                (None, Some(data)) => Source::Png(
                    base64::engine::general_purpose::STANDARD
                        .decode(data.trim())
                        .map_err(|e| ApiError::unsupported_image(format!("image is not valid base64: {e}")))?,
                ),
                _ => return Err(ApiError::bad_request("give exactly one of seed or image")),
            };
            (b.direction_id, b.alpha, b.resolution, source)
        }
        "image/png" => {
            let Query(q) = query.map_err(|e| {
                ApiError::bad_request(format!("PNG uploads need ?direction_id=...&alpha=...: {}", e.body_text()))
            })?;
            (q.direction_id, q.alpha, q.resolution, Source::Png(body.to_vec()))
        }
        other => {
            return Err(ApiError::unsupported_image(format!(
                "content type {other:?}; use application/json or image/png"
            )))
        }
    };

    let st = state.clone();
    let (png, cache_hit) = blocking(move || {
        let record = st.store.load_direction(&direction_id)?;
        let resolution = resolution.unwrap_or_else(|| st.bundle.layout().max_resolution());
        let source = match source {
            Source::Seed(seed) => StyleSource::Seed(seed),
            Source::Png(bytes) => StyleSource::Image(
                decode_png(&bytes).map_err(|e| ApiError::unsupported_image(format!("cannot decode image: {e}")))?,
            ),
        };
        let request = ManipulationRequest {
            source,
            alpha,
            out_resolution: resolution,
        };
        let _guard = st.backend_guard();
        let out = apply(&st.bundle, &record.direction, &request, Some(&st.cache))?;
        Ok((encode_png(&out.image, BitDepth::Eight)?, out.cache_hit))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png"),
            (header::HeaderName::from_static("x-inversion-cache"), if cache_hit { "hit" } else { "miss" }),
        ],
        png,
    )
        .into_response())
}

pub async fn stats(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "jobs": state.jobs.counts(),
        "inversion_cache": state.cache.stats(),
    }))
}

/// Takes job ids off the shared queue in FIFO order, one at a time.
pub async fn worker(state: AppState, queue: Arc<Mutex<mpsc::Receiver<String>>>) {
    loop {
        let next = queue.lock().await.recv().await;
        let Some(id) = next else { break };
        let st = state.clone();
        if let Err(e) = tokio::task::spawn_blocking(move || run_job(&st, &id)).await {
            tracing::error!(error = %e, "job task panicked");
        }
    }
}

fn run_job(state: &AppState, id: &str) {
    let Some((prompt, config)) = state.jobs.start(id) else {
        return;
    };
    let jobs = state.jobs.clone();
    let job_id = id.to_string();
    let mut on_progress = move |p: &Progress| jobs.progress(&job_id, p.iteration, p.loss.total);
    let options = SearchOptions {
        created_at: None,
        progress: Some(&mut on_progress),
    };
    let result = {
        let _guard = state.backend_guard();
        match &prompt {
            PromptSpec::Single { text } => find_direction_with(text, &state.bundle, &config, options),
            PromptSpec::Contrastive { positive, negative } => {
                find_single_channel_direction_with(positive, negative, &state.bundle, &config, options)
            }
        }
    };
    let outcome = |direction_id, r: &stylesteer::optimizer::OptimizeReport| JobOutcome {
        direction_id,
        initial_loss: r.initial_loss(),
        final_loss: r.final_loss(),
        trace: r.trace.clone(),
        wall_clock_secs: r.wall_clock_secs,
    };
    let job_error = |e: &Error| JobError {
        kind: e.kind().as_str().to_string(),
        message: e.to_string(),
    };
    match result {
        Ok((direction, report)) => match state.store.save_direction(&direction, &report) {
            Ok(direction_id) => state.jobs.finish(id, Some(outcome(Some(direction_id), &report)), None),
            Err(e) => state.jobs.finish(id, Some(outcome(None, &report)), Some(job_error(&e))),
        },
        Err(e) => {
            let partial = match &e {
                Error::Divergence { report, .. } => Some(outcome(None, report)),
                _ => None,
            };
            tracing::warn!(job = id, error = %e, "job failed");
            state.jobs.finish(id, partial, Some(job_error(&e)));
        }
    }
}
