//! Asynchronous job registry: a FIFO queue drained by a fixed pool of
//! worker threads, with every job's record persisted as
//! `jobs/{id}/job.json`.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use phasefield::energy::{ModelParams, ParamBounds};
use phasefield::learn::LossReport;
use phasefield::sim::{Channel, PhaseState};
use phasefield::workflow::{self, to_json_file, LearnOptions, PredictOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Segment,
    Learn,
    Simulate,
    Predict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    pub result_ref: Option<String>,
    pub error: Option<String>,
    pub created: String,
    pub updated: String,
}

/// Work description; the inputs already sit in the job directory.
#[allow(clippy::large_enum_variant)]
pub enum Task {
    Learn {
        bounds: ParamBounds,
        options: LearnOptions,
    },
    Simulate {
        dt: f64,
        n_steps: usize,
        snapshot_every: usize,
    },
    Predict {
        options: PredictOptions,
    },
}

impl Task {
    fn kind(&self) -> JobKind {
        match self {
            Task::Learn { .. } => JobKind::Learn,
            Task::Simulate { .. } => JobKind::Simulate,
            Task::Predict { .. } => JobKind::Predict,
        }
    }
}

// Fixed input and output names inside a job directory.
pub const JOB_FILE: &str = "job.json";
pub const DATA_DIR: &str = "data";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const INIT_FILE: &str = "init.json";
pub const PARAMS_FILE: &str = "params.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const THETA_FILE: &str = "theta.json";
pub const INIT_STATE_FILE: &str = "init.pfs";
pub const TRAJECTORY_DIR: &str = "trajectory";
pub const FRAMES_DIR: &str = "frames";
pub const ANNOTATION_FILE: &str = "annotation.json";
pub const SUPERPIXELS_FILE: &str = "superpixels.json";
pub const MASKS_DIR: &str = "masks";

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct State {
    jobs: BTreeMap<String, Job>,
    histories: BTreeMap<String, Vec<LossReport>>,
    queue: VecDeque<(String, Task)>,
    next_id: u64,
}

pub struct Registry {
    root: PathBuf,
    state: Mutex<State>,
    wake: Condvar,
}

fn job_number(id: &str) -> Option<u64> {
    id.strip_prefix('j')?.parse().ok()
}

impl Registry {
    /// Loads existing jobs under `data_root/jobs`. Jobs left queued or
    /// running by a previous process are marked failed.
    pub fn open(data_root: impl Into<PathBuf>) -> std::io::Result<Arc<Self>> {
        let root = data_root.into();
        let jobs_dir = root.join("jobs");
        fs::create_dir_all(&jobs_dir)?;
        let mut jobs = BTreeMap::new();
        let mut next_id = 1;
        for entry in fs::read_dir(&jobs_dir)? {
            let path = entry?.path().join(JOB_FILE);
            let Ok(text) = fs::read_to_string(&path) else {
                continue;
            };
            let Ok(mut job) = serde_json::from_str::<Job>(&text) else {
                continue;
            };
            if matches!(job.status, JobStatus::Queued | JobStatus::Running) {
                job.status = JobStatus::Failed;
                job.error = Some("interrupted".into());
                job.result_ref = None;
                job.updated = now();
                fs::write(&path, to_json_file(&job))?;
            }
            if let Some(n) = job_number(&job.id) {
                next_id = next_id.max(n + 1);
            }
            jobs.insert(job.id.clone(), job);
        }
        Ok(Arc::new(Self {
            root,
            state: Mutex::new(State {
                jobs,
                histories: BTreeMap::new(),
                queue: VecDeque::new(),
                next_id,
            }),
            wake: Condvar::new(),
        }))
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(id)
    }

    fn persist(&self, job: &Job) {
        // the in-memory record stays authoritative if the disk write fails
        let _ = fs::write(self.job_dir(&job.id).join(JOB_FILE), to_json_file(job));
    }

    /// Creates the job directory, lets `prepare` write the inputs into it
    /// and enqueues the task.
    pub fn submit(
        &self,
        prepare: impl FnOnce(&Path) -> std::io::Result<Task>,
    ) -> std::io::Result<String> {
        let id = {
            let mut st = self.state.lock().expect("lock poisoned");
            let id = format!("j{:06}", st.next_id);
            st.next_id += 1;
            id
        };
        let dir = self.job_dir(&id);
        fs::create_dir_all(&dir)?;
        let task = prepare(&dir)?;
        let t = now();
        let job = Job {
            id: id.clone(),
            kind: task.kind(),
            status: JobStatus::Queued,
            progress: 0.0,
            result_ref: None,
            error: None,
            created: t.clone(),
            updated: t,
        };
        self.persist(&job);
        let mut st = self.state.lock().expect("lock poisoned");
        st.jobs.insert(id.clone(), job);
        st.queue.push_back((id.clone(), task));
        drop(st);
        self.wake.notify_one();
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.state.lock().expect("lock poisoned").jobs.get(id).cloned()
    }

    /// Loss reports recorded so far by a learn job.
    pub fn history(&self, id: &str) -> Option<Vec<LossReport>> {
        let st = self.state.lock().expect("lock poisoned");
        st.jobs.get(id)?;
        Some(st.histories.get(id).cloned().unwrap_or_default())
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        let mut st = self.state.lock().expect("lock poisoned");
        if let Some(job) = st.jobs.get_mut(id) {
            f(job);
            job.updated = now();
            let job = job.clone();
            drop(st);
            self.persist(&job);
        }
    }

    /// In-memory only; `job.json` is rewritten on status changes.
    fn set_progress(&self, id: &str, p: f64) {
        let mut st = self.state.lock().expect("lock poisoned");
        if let Some(job) = st.jobs.get_mut(id) {
            if p.is_finite() && p > job.progress {
                job.progress = p.min(1.0);
                job.updated = now();
            }
        }
    }

    fn push_history(&self, id: &str, report: LossReport) {
        let mut st = self.state.lock().expect("lock poisoned");
        st.histories.entry(id.to_owned()).or_default().push(report);
    }

    pub fn start_workers(self: &Arc<Self>, n: usize) {
        for _ in 0..n.max(1) {
            let reg = Arc::clone(self);
            thread::spawn(move || reg.work());
        }
    }

    fn work(&self) {
        loop {
            let (id, task) = {
                let mut st = self.state.lock().expect("lock poisoned");
                loop {
                    if let Some(item) = st.queue.pop_front() {
                        break item;
                    }
                    st = self.wake.wait(st).expect("lock poisoned");
                }
            };
            self.update(&id, |j| j.status = JobStatus::Running);
            let dir = self.job_dir(&id);
            match self.execute(&id, &dir, task) {
                Ok(result_ref) => self.update(&id, |j| {
                    j.status = JobStatus::Done;
                    j.progress = 1.0;
                    j.result_ref = Some(result_ref);
                }),
                Err(e) => self.update(&id, |j| {
                    j.status = JobStatus::Failed;
                    j.error = Some(e.to_string());
                }),
            }
        }
    }

    fn execute(&self, id: &str, dir: &Path, task: Task) -> phasefield::Result<String> {
        let rel = |name: &str| format!("jobs/{id}/{name}");
        match task {
            Task::Learn { bounds, options } => {
                let (theta, history) =
                    workflow::learn(dir.join(DATA_DIR), &bounds, &options, |p| {
                        self.push_history(id, *p.report);
                        if p.iterations > 0 {
                            self.set_progress(id, p.iteration as f64 / p.iterations as f64);
                        }
                    })?;
                workflow::write_learn_outputs(
                    dir.join(PARAMS_FILE),
                    Some(&dir.join(HISTORY_FILE)),
                    &theta,
                    &history,
                )?;
                workflow::write_params(
                    self.root.join("params").join(format!("{id}.json")),
                    &theta,
                )?;
                Ok(rel(PARAMS_FILE))
            }
            Task::Simulate {
                dt,
                n_steps,
                snapshot_every,
            } => {
                let theta: ModelParams = workflow::read_params(dir.join(THETA_FILE))?;
                let init = PhaseState::load(dir.join(INIT_STATE_FILE))?;
                workflow::simulate(
                    &theta,
                    &init,
                    dt,
                    n_steps,
                    snapshot_every,
                    dir.join(TRAJECTORY_DIR),
                    |p| self.set_progress(id, 0.95 * p),
                )?;
                workflow::render(dir.join(TRAJECTORY_DIR), Channel::Eta, dir.join(FRAMES_DIR))?;
                Ok(rel(TRAJECTORY_DIR))
            }
            Task::Predict { options } => {
                let theta = workflow::read_params(dir.join(THETA_FILE))?;
                let map = phasefield::slic::SuperpixelMap::load(dir.join(SUPERPIXELS_FILE))?;
                let ann = phasefield::annot::load_annotation(dir.join(ANNOTATION_FILE), Some(&map))?;
                workflow::predict(&theta, &map, &ann, &options, dir.join(MASKS_DIR))?;
                Ok(rel(MASKS_DIR))
            }
        }
    }
}
