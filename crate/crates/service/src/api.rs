use std::fs;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use phasefield::annot::{compose_mask, rasterize_strokes, Annotation, BrushStroke};
use phasefield::energy::{ModelParams, ParamBounds};
use phasefield::grid::Mask;
use phasefield::learn::{extract_state, GradientMode, DEFAULT_LAMBDA};
use phasefield::raster::save_mask_png;
use phasefield::sim::{frame_file_name, PhaseState};
use phasefield::slic::{slic_segment, SuperpixelMap, DEFAULT_MAX_ITER};
use phasefield::workflow::{
    mask_file_name, write_params, LearnOptions, PairSpec, PairsFile, PredictOptions,
    UNBOUNDED_INIT,
};

use crate::error::{ApiError, ApiResult};
use crate::jobs::{self, Job, JobKind, JobStatus, Task};
use crate::store::check_id;
use crate::App;

/// Parses a JSON body, reporting the path of the first offending field.
fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ApiError::bad_request(path, e.into_inner().to_string())
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn require(ok: bool, path: &str, message: &str) -> ApiResult<()> {
    if ok {
        Ok(())
    } else {
        Err(ApiError::bad_request(path, message))
    }
}

fn positive(v: f64, path: &str) -> ApiResult<()> {
    require(v.is_finite() && v > 0.0, path, "must be finite and > 0")
}

pub async fn list_frames(State(app): State<Arc<App>>) -> ApiResult<Response> {
    blocking(move || Ok(Json(app.store.list_frames()?).into_response())).await
}

/// `GET /api/frames/{id}.png`
pub async fn frame_png(State(app): State<Arc<App>>, Path(file): Path<String>) -> ApiResult<Response> {
    let id = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::not_found(format!("no such resource `{file}`")))?
        .to_owned();
    blocking(move || Ok(png(app.store.frame_png(&id)?))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    k: usize,
    #[serde(default = "default_m")]
    m: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
}

fn default_m() -> f64 {
    10.0
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

pub async fn segment(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: SegmentRequest = parse(&body)?;
    blocking(move || {
        let img = app.store.frame_image(&id)?;
        let map = slic_segment(&img, req.k, req.m, req.max_iter)?;
        app.store.save_superpixels(&id, &map)?;
        Ok(json_text(map.to_json()))
    })
    .await
}

pub async fn get_superpixels(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    blocking(move || match app.store.superpixels(&id)? {
        Some(map) => Ok(json_text(map.to_json())),
        None => Err(ApiError::not_found(format!("no superpixel map for frame `{id}`"))),
    })
    .await
}

/// Annotation as sent by the UI: eraser input as brush strokes, optionally
/// plus an already rasterized mask.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    #[serde(default)]
    frame_id: Option<String>,
    superpixel_ref: String,
    #[serde(default)]
    selected: Vec<u32>,
    #[serde(default)]
    strokes: Vec<BrushStroke>,
    #[serde(default)]
    erased: Option<Mask>,
    #[serde(default)]
    author: String,
    #[serde(default)]
    timestamp: Option<String>,
}

pub async fn put_annotation(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: AnnotationRequest = parse(&body)?;
    blocking(move || {
        if let Some(fid) = &req.frame_id {
            require(fid == &id, "frame_id", "does not match the URL")?;
        }
        let img = app.store.frame_image(&id)?;
        let map = app.store.superpixels(&id)?.ok_or_else(|| {
            ApiError::conflict(format!("frame `{id}` has no superpixel map; segment it first"))
        })?;
        let mut erased = rasterize_strokes(img.width(), img.height(), &req.strokes)?;
        if let Some(extra) = &req.erased {
            erased = erased
                .union(extra)
                .map_err(|e| ApiError::bad_request("erased", e.to_string()))?;
        }
        let mut selected = req.selected;
        selected.sort_unstable();
        selected.dedup();
        let ann = Annotation {
            frame_id: id.clone(),
            superpixel_ref: req.superpixel_ref,
            selected,
            erased,
            author: req.author,
            timestamp: req.timestamp.unwrap_or_else(|| {
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
            }),
        };
        ann.check(&map)?;
        app.store.save_annotation(&ann)?;
        Ok(json_text(ann.to_json()))
    })
    .await
}

pub async fn get_annotation(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    blocking(move || match app.store.annotation_json(&id)? {
        Some(text) => Ok(json_text(text)),
        None => Err(ApiError::not_found(format!("no annotation for frame `{id}`"))),
    })
    .await
}

/// Map and annotation of a frame, checked against each other.
fn annotated(app: &App, frame_id: &str, path: &str) -> ApiResult<(SuperpixelMap, Annotation)> {
    check_id(frame_id, "frame").map_err(|e| ApiError::bad_request(path, e.message))?;
    let missing = |what: &str| ApiError::bad_request(path, format!("frame `{frame_id}` has no {what}"));
    let map = app.store.superpixels(frame_id)?.ok_or_else(|| missing("superpixel map"))?;
    let ann = app.store.annotation(frame_id)?.ok_or_else(|| missing("annotation"))?;
    ann.check(&map).map_err(|e| match e {
        phasefield::Error::StaleAnnotation { .. } => ApiError::conflict(format!("{path}: {e}")),
        e => ApiError::bad_request(path, e.to_string()),
    })?;
    Ok((map, ann))
}

/// Inline parameters or the name of a stored set (a finished learn job id).
#[derive(Deserialize)]
#[serde(untagged)]
pub enum ThetaRef {
    Inline(ModelParams),
    Stored(String),
}

impl ThetaRef {
    fn resolve(&self, app: &App) -> ApiResult<ModelParams> {
        let theta = match self {
            ThetaRef::Inline(t) => *t,
            ThetaRef::Stored(name) => app
                .store
                .params(name)
                .map_err(|e| ApiError::bad_request("theta", e.message))?,
        };
        require(theta.is_finite(), "theta", "parameters must be finite")?;
        Ok(theta)
    }
}

#[derive(Serialize)]
struct Submitted {
    job_id: String,
}

fn submitted(id: String) -> Response {
    (StatusCode::ACCEPTED, Json(Submitted { job_id: id })).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnPairRequest {
    initial: String,
    target: String,
    k: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnRequest {
    pairs: Vec<LearnPairRequest>,
    bounds: ParamBounds,
    #[serde(default = "default_lambda")]
    lambda1: f64,
    #[serde(default = "default_lambda")]
    lambda2: f64,
    #[serde(default = "default_lr")]
    learning_rate: f64,
    #[serde(default = "default_iterations")]
    iterations: usize,
    dt: f64,
    #[serde(default)]
    gradient_mode: GradientMode,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    init: Option<ModelParams>,
    #[serde(default = "default_width")]
    interface_width: f64,
    #[serde(default = "default_dx")]
    dx: f64,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_lr() -> f64 {
    0.02
}

fn default_iterations() -> usize {
    500
}

fn default_width() -> f64 {
    2.0
}

fn default_dx() -> f64 {
    1.0
}

/// Composes the referenced annotations into `jobs/{id}/data` so the job
/// is independent of later edits, then queues the fit.
pub async fn submit_learn(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<Response> {
    let req: LearnRequest = parse(&body)?;
    for (name, v) in [("lambda1", req.lambda1), ("lambda2", req.lambda2)] {
        require(v.is_finite() && v >= 0.0, name, "must be finite and >= 0")?;
    }
    positive(req.learning_rate, "learning_rate")?;
    positive(req.dt, "dt")?;
    positive(req.interface_width, "interface_width")?;
    positive(req.dx, "dx")?;
    require(!req.pairs.is_empty(), "pairs", "at least one pair is required")?;
    if let Some(init) = &req.init {
        require(init.is_finite(), "init", "parameters must be finite")?;
    }
    blocking(move || {
        let mut masks: Vec<(String, Mask)> = Vec::new();
        for (n, pair) in req.pairs.iter().enumerate() {
            require(pair.k >= 1, &format!("pairs[{n}].k"), "must be at least 1")?;
            for (end, frame_id) in [("initial", &pair.initial), ("target", &pair.target)] {
                if masks.iter().any(|(f, _)| f == frame_id) {
                    continue;
                }
                let path = format!("pairs[{n}].{end}");
                let (map, ann) = annotated(&app, frame_id, &path)?;
                let mask = compose_mask(&map, &ann).map_err(|e| ApiError::bad_request(&path, e.to_string()))?;
                masks.push((frame_id.clone(), mask));
            }
        }
        let mask_rel = |f: &str| format!("masks/{f}.png");
        let pairs_file = PairsFile {
            dt: req.dt,
            dx: req.dx,
            interface_width: req.interface_width,
            pairs: req
                .pairs
                .iter()
                .map(|p| PairSpec {
                    initial: mask_rel(&p.initial),
                    target: mask_rel(&p.target),
                    k: p.k,
                })
                .collect(),
        };
        let options = LearnOptions {
            lambda1: req.lambda1,
            lambda2: req.lambda2,
            learning_rate: req.learning_rate,
            iterations: req.iterations,
            gradient_mode: req.gradient_mode,
            seed: req.seed,
            init: req.init,
        };
        let bounds = req.bounds;
        let id = app.jobs.submit(|dir| {
            let data = dir.join(jobs::DATA_DIR);
            fs::create_dir_all(data.join("masks"))?;
            for (frame_id, mask) in &masks {
                save_mask_png(data.join(mask_rel(frame_id)), mask).map_err(std::io::Error::other)?;
            }
            pairs_file.save(&data).map_err(std::io::Error::other)?;
            fs::write(dir.join(jobs::BOUNDS_FILE), phasefield::workflow::to_json_file(&bounds))?;
            let init = options.init.unwrap_or_else(|| bounds.midpoint_init(UNBOUNDED_INIT));
            write_params(dir.join(jobs::INIT_FILE), &init).map_err(std::io::Error::other)?;
            Ok(Task::Learn { bounds, options })
        })?;
        Ok(submitted(id))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitRef {
    #[serde(default)]
    frame_id: Option<String>,
    #[serde(default)]
    pfs: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    theta: ThetaRef,
    init: InitRef,
    dt: f64,
    n_steps: usize,
    snapshot_every: usize,
    #[serde(default = "default_width")]
    interface_width: f64,
    #[serde(default = "default_dx")]
    dx: f64,
}

pub async fn submit_simulate(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<Response> {
    let req: SimulateRequest = parse(&body)?;
    positive(req.dt, "dt")?;
    positive(req.interface_width, "interface_width")?;
    positive(req.dx, "dx")?;
    require(req.n_steps >= 1, "n_steps", "must be at least 1")?;
    require(req.snapshot_every >= 1, "snapshot_every", "must be at least 1")?;
    blocking(move || {
        let theta = req.theta.resolve(&app)?;
        let init = match (&req.init.frame_id, &req.init.pfs) {
            (Some(frame_id), None) => {
                let (map, ann) = annotated(&app, frame_id, "init.frame_id")?;
                let mask = compose_mask(&map, &ann)?;
                extract_state(&mask, &theta, req.dx, req.interface_width)?
            }
            (None, Some(rel)) => {
                let ok = !rel.split(['/', '\\']).any(|c| c == ".." || c.is_empty());
                require(ok && !rel.starts_with('/'), "init.pfs", "must be a path inside the data root")?;
                PhaseState::load(app.store.root().join(rel))
                    .map_err(|e| ApiError::bad_request("init.pfs", e.to_string()))?
            }
            _ => return Err(ApiError::bad_request("init", "give exactly one of frame_id or pfs")),
        };
        let (dt, n_steps, snapshot_every) = (req.dt, req.n_steps, req.snapshot_every);
        let id = app.jobs.submit(|dir| {
            write_params(dir.join(jobs::THETA_FILE), &theta).map_err(std::io::Error::other)?;
            init.save(dir.join(jobs::INIT_STATE_FILE)).map_err(std::io::Error::other)?;
            Ok(Task::Simulate {
                dt,
                n_steps,
                snapshot_every,
            })
        })?;
        Ok(submitted(id))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    theta: ThetaRef,
    /// Frame whose annotation is the initial condition.
    frame_id: String,
    steps: Vec<usize>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    dt: f64,
    #[serde(default = "default_width")]
    interface_width: f64,
    #[serde(default = "default_dx")]
    dx: f64,
}

fn default_threshold() -> f64 {
    0.5
}

pub async fn submit_predict(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<Response> {
    let req: PredictRequest = parse(&body)?;
    positive(req.dt, "dt")?;
    positive(req.interface_width, "interface_width")?;
    positive(req.dx, "dx")?;
    require(req.threshold.is_finite(), "threshold", "must be finite")?;
    require(!req.steps.is_empty(), "steps", "at least one step is required")?;
    require(
        req.steps.windows(2).all(|w| w[0] < w[1]),
        "steps",
        "must be strictly increasing",
    )?;
    blocking(move || {
        let theta = req.theta.resolve(&app)?;
        let (map, ann) = annotated(&app, &req.frame_id, "frame_id")?;
        let options = PredictOptions {
            dt: req.dt,
            steps: req.steps,
            threshold: req.threshold,
            dx: req.dx,
            interface_width: req.interface_width,
        };
        let id = app.jobs.submit(|dir| {
            write_params(dir.join(jobs::THETA_FILE), &theta).map_err(std::io::Error::other)?;
            map.save(dir.join(jobs::SUPERPIXELS_FILE)).map_err(std::io::Error::other)?;
            fs::write(dir.join(jobs::ANNOTATION_FILE), ann.to_json())?;
            Ok(Task::Predict { options })
        })?;
        Ok(submitted(id))
    })
    .await
}

fn job(app: &App, id: &str) -> ApiResult<Job> {
    app.jobs
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown job `{id}`")))
}

pub async fn get_job(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    Ok(Json(job(&app, &id)?))
}

pub async fn get_history(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let history = app
        .jobs
        .history(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown job `{id}`")))?;
    Ok(Json(history).into_response())
}

/// `GET /api/results/{job_id}/frame/{k}.png`, `k` being the step index.
pub async fn result_frame(
    State(app): State<Arc<App>>,
    Path((id, file)): Path<(String, String)>,
) -> ApiResult<Response> {
    let j = job(&app, &id)?;
    let step: usize = file
        .strip_suffix(".png")
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| ApiError::not_found(format!("no such frame `{file}`")))?;
    if j.status != JobStatus::Done {
        return Err(ApiError::not_found(format!("job `{id}` has no results yet")));
    }
    let path = match j.kind {
        JobKind::Simulate => app.jobs.job_dir(&id).join(jobs::FRAMES_DIR).join(frame_file_name(step)),
        JobKind::Predict => app.jobs.job_dir(&id).join(jobs::MASKS_DIR).join(mask_file_name(step)),
        _ => return Err(ApiError::not_found(format!("job `{id}` produces no frames"))),
    };
    blocking(move || match fs::read(&path) {
        Ok(bytes) => Ok(png(bytes)),
        Err(_) => Err(ApiError::not_found(format!("job `{id}` has no frame {step}"))),
    })
    .await
}
