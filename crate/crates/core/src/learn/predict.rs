use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::sim::{PhaseState, Simulator};

/// Simulates from `state0` and thresholds `η` at every listed step.
pub fn predict_masks(
    state0: &PhaseState,
    theta: &ModelParams,
    dt: f64,
    step_list: &[usize],
    threshold: f64,
) -> Result<Vec<Mask>> {
    if step_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::schema("steps", "step list must be strictly increasing"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::schema("dt", format!("must be positive, got {dt}")));
    }
    let mut sim = Simulator::new(state0.clone());
    let mut out = Vec::with_capacity(step_list.len());
    for &step in step_list {
        while sim.steps_taken() < step {
            sim.advance(theta, dt)?;
        }
        out.push(sim.state().eta.threshold(threshold));
    }
    Ok(out)
}

/// Fraction of pixels on which the two masks agree.
pub fn pixel_accuracy(a: &Mask, b: &Mask) -> Result<f64> {
    let both = a.intersection(b)?.count();
    let differ = a.count() + b.count() - 2 * both;
    let n = a.width() * a.height();
    Ok((n - differ) as f64 / n as f64)
}
