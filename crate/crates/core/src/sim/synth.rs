//! Synthetic two-void trajectories with known parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};
use crate::sim::{run, stable_dt, PhaseState, Trajectory, SAFE_DT_FRACTION};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size: usize,
    pub dx: f64,
    pub radii: (f64, f64),
    /// Diffuse-interface width; `None` means `2·dx`.
    pub interface_width: Option<f64>,
    /// Time step; `None` means [`SAFE_DT_FRACTION`] of [`stable_dt`] for the
    /// generating parameters.
    pub dt: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 128,
            dx: 1.0,
            radii: (10.0, 16.0),
            interface_width: None,
            dt: None,
        }
    }
}

impl SynthConfig {
    pub fn width(&self) -> f64 {
        self.interface_width.unwrap_or(2.0 * self.dx)
    }

    pub fn dt_for(&self, theta: &ModelParams) -> f64 {
        self.dt
            .unwrap_or_else(|| SAFE_DT_FRACTION * stable_dt(theta, self.dx))
    }
}

/// `½(1 + tanh(d/w))` of a signed distance `d` (positive inside).
pub fn tanh_profile(d: f64, w: f64) -> f64 {
    0.5 * (1.0 + (d / w).tanh())
}

/// Void centres (in pixel units) drawn from `seed`, fully inside the frame
/// and well separated.
pub fn void_centers(cfg: &SynthConfig, seed: u64) -> Result<[(f64, f64); 2]> {
    let n = cfg.size as f64;
    let w = cfg.width() / cfg.dx;
    let (r1, r2) = cfg.radii;
    let margin = |r: f64| r + 4.0 * w + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let pick = |rng: &mut ChaCha8Rng, r: f64| {
            let m = margin(r);
            if 2.0 * m >= n {
                return None;
            }
            Some((rng.gen_range(m..n - m), rng.gen_range(m..n - m)))
        };
        let (Some(a), Some(b)) = (pick(&mut rng, r1), pick(&mut rng, r2)) else {
            break;
        };
        let sep = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        if sep >= r1 + r2 + 6.0 * w {
            return Ok([a, b]);
        }
    }
    Err(Error::Config(format!(
        "cannot place voids of radii {r1} and {r2} in a {}-pixel frame",
        cfg.size
    )))
}

/// Initial state: two tanh-profiled voids, concentrations slaved to `η`.
pub fn two_void_state(cfg: &SynthConfig, seed: u64, theta: &ModelParams) -> Result<PhaseState> {
    let centers = void_centers(cfg, seed)?;
    let w = cfg.width() / cfg.dx;
    let radii = [cfg.radii.0, cfg.radii.1];
    let eta = ScalarField::from_fn(cfg.size, cfg.size, cfg.dx, |i, j| {
        let (x, y) = (i as f64 + 0.5, j as f64 + 0.5);
        let d = centers
            .iter()
            .zip(radii)
            .map(|(c, r)| r - ((x - c.0).powi(2) + (y - c.1).powi(2)).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        tanh_profile(d, w)
    })?;
    slaved_state(eta, theta)
}

/// State at time 0 with `c_v = cv_eq + (1-cv_eq)·η` and `c_i = ci_eq·(1-η)`.
pub fn slaved_state(eta: ScalarField, theta: &ModelParams) -> Result<PhaseState> {
    let c_v = eta.with_values(
        eta.values()
            .iter()
            .map(|e| theta.cv_eq + (1.0 - theta.cv_eq) * e)
            .collect(),
    );
    let c_i = eta.with_values(
        eta.values()
            .iter()
            .map(|e| theta.ci_eq * (1.0 - e))
            .collect(),
    );
    PhaseState::new(c_v, c_i, eta, 0.0)
}

/// Simulates two voids of different sizes and thresholds `η` at 0.5 for
/// ground-truth masks, one per snapshot.
pub fn synth_two_voids(
    seed: u64,
    theta_star: &ModelParams,
    n_steps: usize,
    snapshot_every: usize,
) -> Result<(Trajectory, Vec<Mask>)> {
    synth_two_voids_with(
        &SynthConfig::default(),
        seed,
        theta_star,
        n_steps,
        snapshot_every,
    )
}

pub fn synth_two_voids_with(
    cfg: &SynthConfig,
    seed: u64,
    theta_star: &ModelParams,
    n_steps: usize,
    snapshot_every: usize,
) -> Result<(Trajectory, Vec<Mask>)> {
    let state0 = two_void_state(cfg, seed, theta_star)?;
    let traj = run(
        &state0,
        theta_star,
        cfg.dt_for(theta_star),
        n_steps,
        snapshot_every,
    )?;
    let masks = traj
        .snapshots
        .iter()
        .map(|(_, s)| s.eta.threshold(0.5))
        .collect();
    Ok((traj, masks))
}
