use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use phasefield::grid::Mask;
use phasefield::raster::load_mask_png;
use phasefield::sim::SynthConfig;
use phasefield::slic::SuperpixelMap;
use phasefield::workflow::{self, mask_file_name, SynthOptions, FRAMES_DIR, MASKS_DIR};
use phasefield_service::{router, App, Job, JobKind, JobStatus, Registry};

struct Harness {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    router: Router,
    truth: Vec<Mask>,
}

/// Data root holding two rendered synthetic frames, `f0` and `f1`.
fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    let mut opts = SynthOptions::new(1, 20, 20);
    opts.config = SynthConfig {
        size: 64,
        radii: (6.0, 10.0),
        ..SynthConfig::default()
    };
    workflow::synth(&synth_dir, &opts).unwrap();
    let root = dir.path().join("data");
    std::fs::create_dir_all(root.join("frames")).unwrap();
    let mut truth = Vec::new();
    for (n, step) in [0usize, 20].into_iter().enumerate() {
        let frame = synth_dir.join(FRAMES_DIR).join(format!("frame_{step:06}.png"));
        std::fs::copy(frame, root.join("frames").join(format!("f{n}.png"))).unwrap();
        truth.push(load_mask_png(synth_dir.join(MASKS_DIR).join(mask_file_name(step))).unwrap());
    }
    let app = App::open(&root, 2).unwrap();
    Harness {
        _dir: dir,
        root,
        router: router(app),
        truth,
    }
}

async fn call(router: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(router: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(router, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn wait_for(router: &Router, id: &str) -> Job {
    for _ in 0..1200 {
        let (status, v) = call_json(router, Method::GET, &format!("/api/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let job: Job = serde_json::from_value(v).unwrap();
        if matches!(job.status, JobStatus::Done | JobStatus::Failed) {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    panic!("job {id} did not finish");
}

/// Segments a frame and annotates the superpixels that mostly lie inside
/// `truth`.
async fn annotate(h: &Harness, frame: &str, truth: &Mask) -> Value {
    let (status, v) = call_json(
        &h.router,
        Method::POST,
        &format!("/api/frames/{frame}/superpixels"),
        Some(json!({"k": 256, "m": 10.0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let map = SuperpixelMap::from_json(&v.to_string()).unwrap();
    let mut inside = vec![0usize; map.n_labels() as usize];
    for (p, &l) in map.labels().iter().enumerate() {
        if truth.contains(p % map.width(), p / map.width()) {
            inside[l as usize] += 1;
        }
    }
    let selected: Vec<u32> = map
        .areas()
        .iter()
        .enumerate()
        .filter(|(l, &a)| 2 * inside[*l] > a)
        .map(|(l, _)| l as u32)
        .collect();
    let body = json!({
        "superpixel_ref": map.content_hash(),
        "selected": selected,
        "strokes": [{"points": [[0.5, 0.5]], "radius": 0.5}],
        "author": "tester",
        "timestamp": "2024-05-01T00:00:00Z",
    });
    let (status, v) = call_json(&h.router, Method::PUT, &format!("/api/frames/{frame}/annotation"), Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

#[tokio::test(flavor = "multi_thread")]
async fn frames_and_annotations() {
    let h = harness();
    let (status, v) = call_json(&h.router, Method::GET, "/api/frames", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([
        {"frame_id": "f0", "width": 64, "height": 64},
        {"frame_id": "f1", "width": 64, "height": 64},
    ]));
    let (status, png) = call(&h.router, Method::GET, "/api/frames/f0.png", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(png, std::fs::read(h.root.join("frames/f0.png")).unwrap());
    let (status, _) = call(&h.router, Method::GET, "/api/frames/nope.png", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&h.router, Method::GET, "/api/frames/f0/annotation", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(
        &h.router,
        Method::PUT,
        "/api/frames/f0/annotation",
        Some(json!({"superpixel_ref": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "annotating before segmenting");

    let saved = annotate(&h, "f0", &h.truth[0]).await;
    let (status, back) = call_json(&h.router, Method::GET, "/api/frames/f0/annotation", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(back, saved);
    assert_eq!(back["erased"]["runs"], json!([[0, 0, 1]]));

    let (status, v) = call_json(
        &h.router,
        Method::PUT,
        "/api/frames/f0/annotation",
        Some(json!({"superpixel_ref": "0000", "selected": [0]})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");

    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/frames/f0/superpixels",
        Some(json!({"k": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["path"], "k");
}

#[tokio::test(flavor = "multi_thread")]
async fn validation_errors_name_the_field() {
    let h = harness();
    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/learn",
        Some(json!({"pairs": [{"initial": "f0", "target": "f1", "k": 20}], "bounds": {}, "dt": 0.01, "lambda1": -1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "lambda1");

    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/learn",
        Some(json!({"pairs": [{"initial": "f0", "target": "f1", "k": "x"}], "bounds": {}, "dt": 0.01})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "pairs[0].k");

    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/learn",
        Some(json!({"pairs": [{"initial": "f0", "target": "f1", "k": 20}], "bounds": {}, "dt": 0.01})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "pairs[0].initial");

    let (status, _) = call(&h.router, Method::GET, "/api/jobs/j999999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&h.router, Method::GET, "/api/results/j999999/frame/0.png", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn learn_simulate_predict_pipeline() {
    let h = harness();
    annotate(&h, "f0", &h.truth[0]).await;
    annotate(&h, "f1", &h.truth[1]).await;

    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/learn",
        Some(json!({
            "pairs": [{"initial": "f0", "target": "f1", "k": 20}],
            "bounds": {"M_v": [0.5, 1.5], "L": [0.5, 1.5]},
            "dt": 0.01,
            "iterations": 3,
        })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let learn_id = v["job_id"].as_str().unwrap().to_owned();
    let job = wait_for(&h.router, &learn_id).await;
    assert_eq!(job.kind, JobKind::Learn);
    assert_eq!(job.status, JobStatus::Done, "{:?}", job.error);
    assert_eq!(job.progress, 1.0);
    assert_eq!(job.result_ref.as_deref(), Some(format!("jobs/{learn_id}/params.json").as_str()));
    let (status, hist) = call_json(&h.router, Method::GET, &format!("/api/jobs/{learn_id}/history"), None).await;
    assert_eq!(status, StatusCode::OK);
    let totals: Vec<f64> = hist.as_array().unwrap().iter().map(|r| r["total"].as_f64().unwrap()).collect();
    assert_eq!(totals.len(), 4);
    assert!(totals.windows(2).all(|w| w[1] <= w[0]));
    assert!(h.root.join("params").join(format!("{learn_id}.json")).exists());

    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/simulate",
        Some(json!({
            "theta": learn_id,
            "init": {"frame_id": "f0"},
            "dt": 0.01,
            "n_steps": 10,
            "snapshot_every": 5,
        })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let sim_id = v["job_id"].as_str().unwrap().to_owned();
    let job = wait_for(&h.router, &sim_id).await;
    assert_eq!(job.status, JobStatus::Done, "{:?}", job.error);
    let (status, png) = call(&h.router, Method::GET, &format!("/api/results/{sim_id}/frame/5.png"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&png[1..4], b"PNG");
    let (status, _) = call(&h.router, Method::GET, &format!("/api/results/{sim_id}/frame/6.png"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let reference = phasefield::energy::ModelParams::reference();
    let dt = phasefield::sim::SAFE_DT_FRACTION * phasefield::sim::stable_dt(&reference, 1.0);
    let theta = serde_json::to_value(reference).unwrap();
    let (status, v) = call_json(
        &h.router,
        Method::POST,
        "/api/jobs/predict",
        Some(json!({"theta": theta, "frame_id": "f0", "steps": [0, 20], "dt": dt})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let pred_id = v["job_id"].as_str().unwrap().to_owned();
    let job = wait_for(&h.router, &pred_id).await;
    assert_eq!(job.status, JobStatus::Done, "{:?}", job.error);
    let (status, png) = call(&h.router, Method::GET, &format!("/api/results/{pred_id}/frame/20.png"), None).await;
    assert_eq!(status, StatusCode::OK);
    let mask = phasefield::raster::decode_mask_png(&png).unwrap();
    let acc = phasefield::learn::pixel_accuracy(&mask, &h.truth[1]).unwrap();
    assert!(acc > 0.9, "accuracy {acc}");
}

fn write_job(root: &Path, id: &str, status: JobStatus) {
    let dir = root.join("jobs").join(id);
    std::fs::create_dir_all(&dir).unwrap();
    let job = Job {
        id: id.into(),
        kind: JobKind::Simulate,
        status,
        progress: 0.3,
        result_ref: None,
        error: None,
        created: "2024-01-01T00:00:00.000Z".into(),
        updated: "2024-01-01T00:00:00.000Z".into(),
    };
    std::fs::write(dir.join("job.json"), serde_json::to_string(&job).unwrap()).unwrap();
}

#[test]
fn restart_marks_unfinished_jobs_interrupted() {
    let dir = tempfile::tempdir().unwrap();
    write_job(dir.path(), "j000003", JobStatus::Running);
    write_job(dir.path(), "j000004", JobStatus::Queued);
    let reg: Arc<Registry> = Registry::open(dir.path()).unwrap();
    for id in ["j000003", "j000004"] {
        let job = reg.get(id).unwrap();
        assert_eq!(job.status, JobStatus::Failed);
        assert_eq!(job.error.as_deref(), Some("interrupted"));
        let on_disk: Job =
            serde_json::from_slice(&std::fs::read(dir.path().join("jobs").join(id).join("job.json")).unwrap())
                .unwrap();
        assert_eq!(on_disk, job);
    }
    let id = reg
        .submit(|_| {
            Ok(phasefield_service::jobs::Task::Simulate {
                dt: 0.01,
                n_steps: 1,
                snapshot_every: 1,
            })
        })
        .unwrap();
    assert_eq!(id, "j000005");
}
