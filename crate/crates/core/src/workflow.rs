//! File-level pipeline stages. The command line and the HTTP service both
//! go through these functions, so equal inputs give byte-identical files.
//!
//! A data directory for learning holds `pairs.json` and the masks or
//! states it names by relative path:
//!
//! ```text
//! {"dt": 0.01, "dx": 1.0, "interface_width": 2.0,
//!  "pairs": [{"initial": "masks/mask_000000.png", "target": "masks/mask_000050.png", "k": 50}]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annot::{compose_mask, iou, Annotation};
use crate::energy::{ModelParams, ParamBounds};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::learn::{
    extract_state, fit_with_progress, pixel_accuracy, predict_masks, FitProgress, Frame,
    GradientMode, LossReport, TrainConfig, TrainPair, DEFAULT_LAMBDA,
};
use crate::raster::{load_mask_png, save_mask_png};
use crate::sim::{
    frame_file_name, render_frame, run_with_progress, synth_two_voids_with, Channel, PhaseState,
    SynthConfig, Trajectory,
};
use crate::slic::SuperpixelMap;

pub const PAIRS_FILE: &str = "pairs.json";
pub const THETA_FILE: &str = "theta.json";
pub const MASKS_DIR: &str = "masks";
pub const FRAMES_DIR: &str = "frames";

pub fn mask_file_name(step: usize) -> String {
    format!("mask_{step:06}.png")
}

/// Pretty JSON with a trailing newline, the on-disk form of every JSON
/// artifact.
pub fn to_json_file<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let theta: ModelParams = read_json(path.as_ref())?;
    if !theta.is_finite() {
        return Err(Error::Format(format!(
            "{}: parameters must be finite",
            path.as_ref().display()
        )));
    }
    Ok(theta)
}

pub fn write_params(path: impl AsRef<Path>, theta: &ModelParams) -> Result<()> {
    fs::write(path, to_json_file(theta))?;
    Ok(())
}

pub fn read_bounds(path: impl AsRef<Path>) -> Result<ParamBounds> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ParamBounds::from_json_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub initial: String,
    pub target: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsFile {
    pub dt: f64,
    #[serde(default = "unit")]
    pub dx: f64,
    pub interface_width: f64,
    pub pairs: Vec<PairSpec>,
}

fn unit() -> f64 {
    1.0
}

fn load_frame(dir: &Path, rel: &str, field: String) -> Result<Frame> {
    let path = dir.join(rel);
    let frame = if rel.ends_with(".pfs") {
        PhaseState::load(&path).map(Frame::State)
    } else {
        load_mask_png(&path).map(Frame::Mask)
    };
    frame.map_err(|e| Error::schema(field, format!("{}: {e}", path.display())))
}

impl PairsFile {
    pub fn load(data_dir: impl AsRef<Path>) -> Result<Self> {
        read_json(&data_dir.as_ref().join(PAIRS_FILE))
    }

    pub fn save(&self, data_dir: impl AsRef<Path>) -> Result<()> {
        fs::write(data_dir.as_ref().join(PAIRS_FILE), to_json_file(self))?;
        Ok(())
    }

    /// Reads every referenced frame relative to `data_dir`.
    pub fn training_pairs(&self, data_dir: impl AsRef<Path>) -> Result<Vec<TrainPair>> {
        let dir = data_dir.as_ref();
        self.pairs
            .iter()
            .enumerate()
            .map(|(n, p)| {
                Ok(TrainPair {
                    initial: load_frame(dir, &p.initial, format!("pairs[{n}].initial"))?,
                    target: load_frame(dir, &p.target, format!("pairs[{n}].target"))?,
                    k: p.k,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub theta: ModelParams,
    /// Number of consecutive snapshot pairs listed in `pairs.json`; all of
    /// them when `None`.
    pub pairs: Option<usize>,
    pub config: SynthConfig,
}

impl SynthOptions {
    pub fn new(seed: u64, steps: usize, snapshot_every: usize) -> Self {
        Self {
            seed,
            steps,
            snapshot_every,
            theta: ModelParams::reference(),
            pairs: None,
            config: SynthConfig::default(),
        }
    }
}

/// Writes a two-void trajectory into `out` (states plus manifest), its
/// masks under `masks/`, rendered `η` frames under `frames/`, the
/// generating parameters and a `pairs.json` of consecutive snapshots.
pub fn synth(out: impl AsRef<Path>, opts: &SynthOptions) -> Result<Trajectory> {
    let out = out.as_ref();
    let (traj, masks) = synth_two_voids_with(
        &opts.config,
        opts.seed,
        &opts.theta,
        opts.steps,
        opts.snapshot_every,
    )?;
    traj.save(out)?;
    fs::create_dir_all(out.join(MASKS_DIR))?;
    fs::create_dir_all(out.join(FRAMES_DIR))?;
    for ((step, state), mask) in traj.snapshots.iter().zip(&masks) {
        save_mask_png(out.join(MASKS_DIR).join(mask_file_name(*step)), mask)?;
        render_frame(state, Channel::Eta).save_png(out.join(FRAMES_DIR).join(frame_file_name(*step)))?;
    }
    write_params(out.join(THETA_FILE), &opts.theta)?;
    let steps = traj.steps();
    let available = steps.len() - 1;
    let n_pairs = opts.pairs.unwrap_or(available).min(available);
    let mask_path = |s: usize| format!("{MASKS_DIR}/{}", mask_file_name(s));
    let pairs = PairsFile {
        dt: traj.dt,
        dx: opts.config.dx,
        interface_width: opts.config.width(),
        pairs: steps
            .windows(2)
            .take(n_pairs)
            .map(|w| PairSpec {
                initial: mask_path(w[0]),
                target: mask_path(w[1]),
                k: w[1] - w[0],
            })
            .collect(),
    };
    pairs.save(out)?;
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOptions {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub gradient_mode: GradientMode,
    pub seed: u64,
    /// Starting point; box midpoints and 1.0 elsewhere when `None`.
    pub init: Option<ModelParams>,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            lambda1: DEFAULT_LAMBDA,
            lambda2: DEFAULT_LAMBDA,
            learning_rate: 0.02,
            iterations: 500,
            gradient_mode: GradientMode::Adjoint,
            seed: 0,
            init: None,
        }
    }
}

/// Value of unbounded parameters in the default initialization.
pub const UNBOUNDED_INIT: f64 = 1.0;

pub fn train_config(
    data_dir: impl AsRef<Path>,
    bounds: &ParamBounds,
    opts: &LearnOptions,
) -> Result<TrainConfig> {
    let pairs_file = PairsFile::load(&data_dir)?;
    let mut config = TrainConfig::new(
        pairs_file.training_pairs(&data_dir)?,
        *bounds,
        pairs_file.dt,
    );
    config.dx = pairs_file.dx;
    config.interface_width = pairs_file.interface_width;
    config.lambda1 = opts.lambda1;
    config.lambda2 = opts.lambda2;
    config.learning_rate = opts.learning_rate;
    config.iterations = opts.iterations;
    config.gradient_mode = opts.gradient_mode;
    config.seed = opts.seed;
    config.validate()?;
    Ok(config)
}

/// Fits parameters to the pairs of `data_dir`.
pub fn learn(
    data_dir: impl AsRef<Path>,
    bounds: &ParamBounds,
    opts: &LearnOptions,
    progress: impl FnMut(FitProgress<'_>),
) -> Result<(ModelParams, Vec<LossReport>)> {
    let config = train_config(data_dir, bounds, opts)?;
    let init = opts
        .init
        .unwrap_or_else(|| bounds.midpoint_init(UNBOUNDED_INIT));
    fit_with_progress(&config, &init, progress)
}

pub fn history_csv(history: &[LossReport]) -> String {
    let mut s = String::from("iteration,mismatch,penalty_lo,penalty_hi,total\n");
    for (n, r) in history.iter().enumerate() {
        s.push_str(&format!(
            "{n},{},{},{},{}\n",
            r.mismatch, r.penalty_lo, r.penalty_hi, r.total
        ));
    }
    s
}

pub fn write_learn_outputs(
    params_path: impl AsRef<Path>,
    history_path: Option<&Path>,
    theta: &ModelParams,
    history: &[LossReport],
) -> Result<()> {
    write_params(params_path, theta)?;
    if let Some(path) = history_path {
        fs::write(path, history_csv(history))?;
    }
    Ok(())
}

/// Runs and saves a trajectory into `out`.
pub fn simulate(
    theta: &ModelParams,
    init: &PhaseState,
    dt: f64,
    steps: usize,
    snapshot_every: usize,
    out: impl AsRef<Path>,
    progress: impl FnMut(f64),
) -> Result<Trajectory> {
    let traj = run_with_progress(init, theta, dt, steps, snapshot_every, progress)?;
    traj.save(out)?;
    Ok(traj)
}

/// Renders every snapshot of the trajectory in `traj_dir` as
/// `frame_%06d.png`, numbered by step. Returns the file names written.
pub fn render(traj_dir: impl AsRef<Path>, channel: Channel, out: impl AsRef<Path>) -> Result<Vec<String>> {
    let traj = Trajectory::load(traj_dir)?;
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    let mut names = Vec::with_capacity(traj.snapshots.len());
    for (step, state) in &traj.snapshots {
        let name = frame_file_name(*step);
        render_frame(state, channel).save_png(out.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    pub dt: f64,
    pub steps: Vec<usize>,
    pub threshold: f64,
    pub dx: f64,
    pub interface_width: f64,
}

/// Starts from the composed mask of `ann`, simulates with `theta` and writes
/// `mask_%06d.png` for each requested step.
pub fn predict(
    theta: &ModelParams,
    map: &SuperpixelMap,
    ann: &Annotation,
    opts: &PredictOptions,
    out: impl AsRef<Path>,
) -> Result<Vec<Mask>> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::schema("dt", "must be finite and > 0"));
    }
    let mask = compose_mask(map, ann)?;
    let state0 = extract_state(&mask, theta, opts.dx, opts.interface_width)?;
    let masks = predict_masks(&state0, theta, opts.dt, &opts.steps, opts.threshold)?;
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    for (step, m) in opts.steps.iter().zip(&masks) {
        save_mask_png(out.join(mask_file_name(*step)), m)?;
    }
    Ok(masks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame: String,
    pub iou: f64,
    pub pixel_accuracy: f64,
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "png"));
    files.sort();
    Ok(files)
}

/// Compares every mask PNG in `pred` with the same-named file in `truth`.
pub fn metrics(pred: impl AsRef<Path>, truth: impl AsRef<Path>) -> Result<Vec<FrameMetrics>> {
    let files = png_files(pred.as_ref())?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no PNG masks in {}",
            pred.as_ref().display()
        )));
    }
    files
        .iter()
        .map(|p| {
            let name = p.file_name().expect("listed file").to_string_lossy().into_owned();
            let truth_path = truth.as_ref().join(&name);
            if !truth_path.exists() {
                return Err(Error::Config(format!(
                    "{} has no counterpart in {}",
                    name,
                    truth.as_ref().display()
                )));
            }
            let (a, b) = (load_mask_png(p)?, load_mask_png(&truth_path)?);
            Ok(FrameMetrics {
                frame: name.trim_end_matches(".png").to_owned(),
                iou: iou(&a, &b)?,
                pixel_accuracy: pixel_accuracy(&a, &b)?,
            })
        })
        .collect()
}

/// `frame,iou,pixel_accuracy` rows followed by a `mean` row.
pub fn metrics_csv(rows: &[FrameMetrics]) -> String {
    let mut s = String::from("frame,iou,pixel_accuracy\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.frame, r.iou, r.pixel_accuracy));
    }
    let n = rows.len().max(1) as f64;
    let mean_iou = rows.iter().map(|r| r.iou).sum::<f64>() / n;
    let mean_acc = rows.iter().map(|r| r.pixel_accuracy).sum::<f64>() / n;
    s.push_str(&format!("mean,{mean_iou},{mean_acc}\n"));
    s
}
