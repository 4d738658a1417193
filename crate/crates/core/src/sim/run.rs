use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::ModelParams;
use crate::error::{DivergedError, Error, Result};
use crate::sim::step::{Fields, FieldsMut, Kernel};
use crate::sim::PhaseState;

/// Snapshots of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub theta: ModelParams,
    /// `(step index, state)`, step indices strictly increasing.
    pub snapshots: Vec<(usize, PhaseState)>,
}

/// Repeatedly steps a state while reusing scratch buffers.
#[derive(Debug, Clone)]
pub struct Simulator {
    kernel: Kernel,
    current: PhaseState,
    scratch: PhaseState,
    t0: f64,
    steps: usize,
}

impl Simulator {
    pub fn new(state0: PhaseState) -> Self {
        Self {
            kernel: Kernel::new(state0.width(), state0.height(), state0.dx()),
            scratch: state0.clone(),
            t0: state0.time,
            current: state0,
            steps: 0,
        }
    }

    pub fn state(&self) -> &PhaseState {
        &self.current
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances one step; time is `t0 + steps·dt` so snapshot times stay exact.
    pub fn advance(&mut self, theta: &ModelParams, dt: f64) -> Result<(), DivergedError> {
        let src = &self.current;
        let dst = &mut self.scratch;
        self.kernel
            .step(
                Fields {
                    cv: src.c_v.values(),
                    ci: src.c_i.values(),
                    eta: src.eta.values(),
                },
                FieldsMut {
                    cv: dst.c_v.values_mut(),
                    ci: dst.c_i.values_mut(),
                    eta: dst.eta.values_mut(),
                },
                theta,
                dt,
            )
            .map_err(|e| DivergedError {
                step: Some(self.steps + 1),
                ..e
            })?;
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.steps += 1;
        self.current.time = self.t0 + self.steps as f64 * dt;
        Ok(())
    }

    pub fn into_state(self) -> PhaseState {
        self.current
    }
}

/// Runs `n_steps` explicit steps, keeping every `snapshot_every`-th state and
/// always the last one.
pub fn run(
    state0: &PhaseState,
    theta: &ModelParams,
    dt: f64,
    n_steps: usize,
    snapshot_every: usize,
) -> Result<Trajectory> {
    run_with_progress(state0, theta, dt, n_steps, snapshot_every, |_| {})
}

pub fn run_with_progress(
    state0: &PhaseState,
    theta: &ModelParams,
    dt: f64,
    n_steps: usize,
    snapshot_every: usize,
    mut progress: impl FnMut(f64),
) -> Result<Trajectory> {
    if n_steps == 0 || snapshot_every == 0 {
        return Err(Error::Config(
            "n_steps and snapshot_every must be at least 1".into(),
        ));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let mut sim = Simulator::new(state0.clone());
    let mut snapshots = vec![(0, state0.clone())];
    for n in 1..=n_steps {
        sim.advance(theta, dt)?;
        if n % snapshot_every == 0 || n == n_steps {
            snapshots.push((n, sim.state().clone()));
            progress(n as f64 / n_steps as f64);
        }
    }
    Ok(Trajectory {
        dt,
        theta: *theta,
        snapshots,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dt: f64,
    theta: ModelParams,
    snapshots: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    step: usize,
    file: String,
}

pub const MANIFEST_FILE: &str = "trajectory.json";

pub fn state_file_name(step: usize) -> String {
    format!("state_{step:06}.pfs")
}

impl Trajectory {
    pub fn steps(&self) -> Vec<usize> {
        self.snapshots.iter().map(|(s, _)| *s).collect()
    }

    pub fn last(&self) -> &PhaseState {
        &self.snapshots.last().expect("trajectory is never empty").1
    }

    /// Writes `state_%06d.pfs` per snapshot plus `trajectory.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.snapshots.len());
        for (step, state) in &self.snapshots {
            let file = state_file_name(*step);
            state.save(dir.join(&file))?;
            entries.push(ManifestEntry { step: *step, file });
        }
        let manifest = Manifest {
            dt: self.dt,
            theta: self.theta,
            snapshots: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
        for e in manifest.snapshots {
            if snapshots
                .last()
                .is_some_and(|(s, _): &(usize, _)| *s >= e.step)
            {
                return Err(Error::Format("snapshot steps must increase".into()));
            }
            snapshots.push((e.step, PhaseState::load(dir.join(&e.file))?));
        }
        if snapshots.is_empty() {
            return Err(Error::Format("trajectory has no snapshots".into()));
        }
        Ok(Self {
            dt: manifest.dt,
            theta: manifest.theta,
            snapshots,
        })
    }
}
