//! Grows two voids from the reference parameters and writes the trajectory
//! plus rendered frames.
//!
//! ```text
//! cargo run -p phasefield --example simulate_two_voids -- /tmp/voids
//! ```

use phasefield::energy::{total_free_energy, ModelParams};
use phasefield::sim::{frame_file_name, render_frame, run, two_void_state, Channel, SynthConfig};

fn main() -> phasefield::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "two_voids".into());
    let theta = ModelParams::reference();
    let cfg = SynthConfig::default();
    let state0 = two_void_state(&cfg, 1, &theta)?;
    let dt = cfg.dt_for(&theta);
    let traj = run(&state0, &theta, dt, 1000, 100)?;
    traj.save(&out)?;
    for (step, state) in &traj.snapshots {
        let void = state.eta.threshold(0.5).count();
        println!(
            "step {step:5}  void pixels {void:6}  F = {:.4}",
            total_free_energy(state, &theta)
        );
        render_frame(state, Channel::Eta).save_png(std::path::Path::new(&out).join(frame_file_name(*step)))?;
    }
    Ok(())
}
