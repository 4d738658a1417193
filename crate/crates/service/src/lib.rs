//! HTTP JSON API over a file-backed data root: frames, superpixel maps,
//! annotations, and asynchronous learn / simulate / predict jobs.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/frames` | `[{frame_id, width, height}]` |
//! | GET | `/api/frames/{id}.png` | frame image |
//! | POST | `/api/frames/{id}/superpixels` | `{k, m, max_iter}` → map |
//! | GET | `/api/frames/{id}/superpixels` | cached map |
//! | PUT | `/api/frames/{id}/annotation` | annotation with brush strokes |
//! | GET | `/api/frames/{id}/annotation` | stored annotation |
//! | POST | `/api/jobs/learn` | → `{job_id}` |
//! | POST | `/api/jobs/simulate` | → `{job_id}` |
//! | POST | `/api/jobs/predict` | → `{job_id}` |
//! | GET | `/api/jobs/{id}` | job record |
//! | GET | `/api/jobs/{id}/history` | loss reports of a learn job so far |
//! | GET | `/api/results/{id}/frame/{k}.png` | frame or mask at step `k` |

mod api;
mod error;
pub mod jobs;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use jobs::{Job, JobKind, JobStatus, Registry};
pub use store::{FrameInfo, Store};

pub struct App {
    pub store: Store,
    pub jobs: Arc<Registry>,
}

impl App {
    /// Opens (creating if needed) a data root and starts `workers` job
    /// threads.
    pub fn open(data_root: impl Into<PathBuf>, workers: usize) -> std::io::Result<Arc<Self>> {
        let root = data_root.into();
        let store = Store::open(&root)?;
        let jobs = Registry::open(&root)?;
        jobs.start_workers(workers);
        Ok(Arc::new(Self { store, jobs }))
    }
}

/// Half the available cores, at least one.
pub fn default_workers() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    (cores / 2).max(1)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/frames", get(api::list_frames))
        .route("/api/frames/{file}", get(api::frame_png))
        .route(
            "/api/frames/{id}/superpixels",
            post(api::segment).get(api::get_superpixels),
        )
        .route(
            "/api/frames/{id}/annotation",
            get(api::get_annotation).put(api::put_annotation),
        )
        .route("/api/jobs/learn", post(api::submit_learn))
        .route("/api/jobs/simulate", post(api::submit_simulate))
        .route("/api/jobs/predict", post(api::submit_predict))
        .route("/api/jobs/{id}", get(api::get_job))
        .route("/api/jobs/{id}/history", get(api::get_history))
        .route("/api/results/{id}/frame/{file}", get(api::result_frame))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves the API on `addr` until the process exits.
pub async fn serve(data_root: impl Into<PathBuf>, addr: SocketAddr, workers: usize) -> std::io::Result<()> {
    let app = App::open(data_root, workers)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(app)).await
}

/// Blocking wrapper around [`serve`] with its own runtime.
pub fn serve_blocking(data_root: impl Into<PathBuf>, addr: SocketAddr, workers: usize) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(data_root, addr, workers))
}
