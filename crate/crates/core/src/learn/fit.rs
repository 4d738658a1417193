use crate::energy::{ModelParams, N_PARAMS};
use crate::error::{Error, Result};
use crate::learn::{GradientMode, LossReport, Objective, Tape, TrainConfig};

/// Coordinates are `θ_p / max(|θ_init,p|, SCALE_FLOOR)`.
const SCALE_FLOOR: f64 = 1e-3;
/// Curvature pairs kept by the quasi-Newton update.
const MEMORY: usize = 10;
/// Largest single move of any scaled coordinate.
const MAX_STEP: f64 = 0.2;
const MAX_HALVINGS: usize = 6;
const MAX_DIVERGED_ITERATIONS: usize = 10;

/// Progress callback payload.
#[derive(Debug, Clone, Copy)]
pub struct FitProgress<'a> {
    pub iteration: usize,
    pub iterations: usize,
    pub report: &'a LossReport,
    pub theta: &'a ModelParams,
}

type Vector = [f64; N_PARAMS];

fn dot(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &Vector) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Limited-memory BFGS history in scaled coordinates.
struct Curvature {
    pairs: Vec<(Vector, Vector, f64)>,
}

impl Curvature {
    fn push(&mut self, s: Vector, y: Vector) {
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if self.pairs.len() == MEMORY {
                self.pairs.remove(0);
            }
            self.pairs.push((s, y, 1.0 / sy));
        }
    }

    /// Search direction for gradient `g`; a plain gradient step whose
    /// largest component is `first_step` when the history is empty.
    fn direction(&self, g: &Vector, first_step: f64) -> Vector {
        let Some((s_last, y_last, _)) = self.pairs.last() else {
            let m = max_abs(g);
            return g.map(|v| if m > 0.0 { -v * first_step / m } else { 0.0 });
        };
        let mut q = *g;
        let mut alpha = [0.0; MEMORY];
        for (n, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            alpha[n] = rho * dot(s, &q);
            for p in 0..N_PARAMS {
                q[p] -= alpha[n] * y[p];
            }
        }
        let gamma = dot(s_last, y_last) / dot(y_last, y_last);
        q.iter_mut().for_each(|v| *v *= gamma);
        for (n, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = rho * dot(y, &q);
            for p in 0..N_PARAMS {
                q[p] += (alpha[n] - beta) * s[p];
            }
        }
        q.map(|v| -v)
    }
}

/// Minimizes the total loss from `theta_init`.
///
/// Works in coordinates scaled by each parameter's initial magnitude, where
/// the 14 sensitivities are comparable. The first step (and any step after
/// a failed search) follows the gradient with its largest component moving
/// `learning_rate`; later steps use an L-BFGS direction. A trial step that
/// raises the total or diverges is halved up to six times and dropped if it
/// never succeeds, so the recorded totals never increase. `history[0]` is
/// the loss at `theta_init`, so `history.len() == iterations + 1`.
pub fn fit(config: &TrainConfig, theta_init: &ModelParams) -> Result<(ModelParams, Vec<LossReport>)> {
    fit_with_progress(config, theta_init, |_| {})
}

pub fn fit_with_progress(
    config: &TrainConfig,
    theta_init: &ModelParams,
    mut progress: impl FnMut(FitProgress<'_>),
) -> Result<(ModelParams, Vec<LossReport>)> {
    let objective = Objective::new(config)?;
    let adjoint = config.gradient_mode == GradientMode::Adjoint;
    let scale = theta_init.to_array().map(|v| v.abs().max(SCALE_FLOOR));
    let mut tape = Tape::default();
    let mut trial_tape = Tape::default();
    let loss = |theta: &ModelParams, tape: &mut Tape| {
        if adjoint {
            objective.loss_recorded(theta, tape)
        } else {
            objective.loss(theta)
        }
    };
    // scaled gradient at a point whose loss was just recorded into `tape`
    let gradient_at = |theta: &ModelParams, tape: &Tape| {
        let g = if adjoint {
            Ok(objective.gradient_adjoint(theta, tape))
        } else {
            objective.gradient_fd(theta)
        };
        g.ok().map(|g| {
            let mut out = [0.0; N_PARAMS];
            for p in 0..N_PARAMS {
                out[p] = g[p] * scale[p];
            }
            out
        })
    };

    let mut theta = *theta_init;
    let mut current = loss(&theta, &mut tape);
    let gradient = match current.is_finite() {
        true => gradient_at(&theta, &tape),
        false => None,
    };
    let Some(mut gradient) = gradient else {
        return Err(Error::Config(
            "loss or gradient is not finite at the initial parameters".into(),
        ));
    };
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(current);
    progress(FitProgress {
        iteration: 0,
        iterations: config.iterations,
        report: &current,
        theta: &theta,
    });

    let mut curvature = Curvature { pairs: Vec::new() };
    let mut diverged_run = 0;
    let mut iteration = 1;
    while iteration <= config.iterations {
        let mut direction = curvature.direction(&gradient, config.learning_rate);
        if dot(&direction, &gradient) >= 0.0 {
            curvature.pairs.clear();
            direction = curvature.direction(&gradient, config.learning_rate);
        }
        let longest = max_abs(&direction);
        if longest > MAX_STEP {
            direction.iter_mut().for_each(|v| *v *= MAX_STEP / longest);
        }
        let from_gradient = curvature.pairs.is_empty();
        let base = theta.to_array();
        let mut step = 1.0;
        let mut accepted = false;
        let mut all_diverged = true;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = base;
            for p in 0..N_PARAMS {
                trial[p] += step * direction[p] * scale[p];
            }
            let trial = ModelParams::from_array(trial);
            let report = loss(&trial, &mut trial_tape);
            if report.is_finite() {
                all_diverged = false;
            }
            if report.is_finite() && report.total <= current.total {
                if let Some(g) = gradient_at(&trial, &trial_tape) {
                    let mut y = [0.0; N_PARAMS];
                    for p in 0..N_PARAMS {
                        y[p] = g[p] - gradient[p];
                    }
                    curvature.push(direction.map(|d| d * step), y);
                    theta = trial;
                    current = report;
                    gradient = g;
                    std::mem::swap(&mut tape, &mut trial_tape);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if all_diverged {
            diverged_run += 1;
        } else {
            diverged_run = 0;
        }
        if diverged_run >= MAX_DIVERGED_ITERATIONS {
            return Err(aborted(iteration));
        }
        if !accepted {
            curvature.pairs.clear();
        }
        history.push(current);
        progress(FitProgress {
            iteration,
            iterations: config.iterations,
            report: &current,
            theta: &theta,
        });
        iteration += 1;
        // A failed search from a gradient step leaves the state exactly as
        // it was, so every remaining iteration would repeat it.
        if !accepted && from_gradient {
            if all_diverged {
                let at = iteration - 1 + MAX_DIVERGED_ITERATIONS - diverged_run;
                if at <= config.iterations {
                    return Err(aborted(at));
                }
            }
            while iteration <= config.iterations {
                history.push(current);
                progress(FitProgress {
                    iteration,
                    iterations: config.iterations,
                    report: &current,
                    theta: &theta,
                });
                iteration += 1;
            }
        }
    }
    Ok((theta, history))
}

fn aborted(iteration: usize) -> Error {
    Error::Aborted {
        iteration,
        reason: format!("loss diverged for {MAX_DIVERGED_ITERATIONS} consecutive iterations"),
    }
}
