//! Local HTTP service: direction search as queued jobs, manipulation as
//! synchronous PNG responses.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/health` | | `{"status": "ok"}` |
//! | GET | `/backend` | | backend name, fingerprint, resolutions, capabilities |
//! | POST | `/directions` | `{"prompt", "negative"?, "config"?}` | 202 `{"job_id"}` |
//! | GET | `/jobs` | | all jobs, oldest first |
//! | GET | `/jobs/{id}` | | job state, progress and, when finished, the trace |
//! | GET | `/directions?prompt=&fingerprint=` | | stored direction metadata, newest first |
//! | GET | `/directions/{id}` | | metadata and loss trace of one direction |
//! | POST | `/manipulate` | JSON or `image/png` | PNG |
//! | GET | `/stats` | | job counts and inversion cache counters |
//!
//! Errors are `{"error": {"kind", "message"}}` with status 400 (invalid
//! input), 404 (unknown id), 409 (backend mismatch, or job queue full),
//! 413 (upload too large), 415 (unsupported or undecodable image), 501
//! (backend lacks a capability, such as inversion) or 500.

mod api;
pub mod jobs;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::mpsc;

use stylesteer::backends::{BackendBundle, Concurrency};
use stylesteer::manipulator::InversionCache;
use stylesteer::store::DirectionStore;

pub use api::ApiError;
pub use jobs::{Job, JobCounts, JobOutcome, JobProgress, JobRegistry, JobState};

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 8 * 1024 * 1024;
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Concurrent search jobs. Forced to 1 for single-consumer backends.
    pub workers: usize,
    /// Jobs waiting beyond this are refused with 409.
    pub queue_capacity: usize,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            workers: 1,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("server I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Shared handler state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    pub(crate) bundle: Arc<BackendBundle>,
    pub(crate) store: Arc<DirectionStore>,
    pub(crate) jobs: Arc<JobRegistry>,
    pub(crate) cache: Arc<InversionCache>,
    pub(crate) queue: mpsc::Sender<String>,
    /// Held around every backend call when the backend is single-consumer.
    backend_lock: Option<Arc<Mutex<()>>>,
}

impl AppState {
    /// Builds the state and spawns the worker pool on the current runtime.
    pub fn start(bundle: BackendBundle, store: DirectionStore, config: &ServiceConfig) -> Result<Self, ServiceError> {
        if config.workers == 0 || config.queue_capacity == 0 {
            return Err(ServiceError::Config("workers and queue capacity must be >= 1".into()));
        }
        let single = bundle.concurrency == Concurrency::SingleConsumer;
        let workers = if single { 1 } else { config.workers };
        let (tx, rx) = mpsc::channel(config.queue_capacity);
        let state = AppState {
            bundle: Arc::new(bundle),
            store: Arc::new(store),
            jobs: Arc::new(JobRegistry::default()),
            cache: Arc::new(InversionCache::new()),
            queue: tx,
            backend_lock: single.then(|| Arc::new(Mutex::new(()))),
        };
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..workers {
            tokio::spawn(api::worker(state.clone(), rx.clone()));
        }
        Ok(state)
    }

    pub fn jobs(&self) -> &JobRegistry {
        &self.jobs
    }

    pub fn cache(&self) -> &InversionCache {
        &self.cache
    }

    pub(crate) fn backend_guard(&self) -> Option<MutexGuard<'_, ()>> {
        self.backend_lock
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    Router::new()
        .route("/health", get(api::health))
        .route("/backend", get(api::backend_info))
        .route("/directions", post(api::submit).get(api::list_directions))
        .route("/directions/{id}", get(api::get_direction))
        .route("/jobs", get(api::list_jobs))
        .route("/jobs/{id}", get(api::get_job))
        .route("/manipulate", post(api::manipulate))
        .route("/stats", get(api::stats))
        .layer(DefaultBodyLimit::max(config.max_upload_bytes))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn run(
    addr: SocketAddr,
    bundle: BackendBundle,
    store: DirectionStore,
    config: ServiceConfig,
) -> Result<(), ServiceError> {
    let state = AppState::start(bundle, store, &config)?;
    let app = router(state, &config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
