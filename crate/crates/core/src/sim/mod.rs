//! Explicit time integration of the void model, trajectories, rendering and
//! synthetic data.

mod render;
mod run;
mod state;
mod step;
mod synth;

pub use render::{frame_file_name, render_frame, render_frame_range};
pub use run::{run, run_with_progress, state_file_name, Simulator, Trajectory, MANIFEST_FILE};
pub use state::{Channel, PhaseState};
pub use step::{
    stable_dt, stable_dt_with_cap, step, DEFAULT_DT_CAP, DIVERGENCE_LIMIT, SAFE_DT_FRACTION,
};
pub use synth::{
    slaved_state, synth_two_voids, synth_two_voids_with, tanh_profile, two_void_state, void_centers,
    SynthConfig,
};

pub(crate) use step::{Fields, FieldsMut, Kernel};
