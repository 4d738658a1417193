//! Forward-Euler update of the coupled Cahn-Hilliard / Allen-Cahn system:
//!
//! ```text
//! c_v' = c_v + dt·(M_v ∇²μ_v - R c_v c_i + P)
//! c_i' = c_i + dt·(M_i ∇²μ_i - R c_v c_i + P)
//! η'   = η   - dt·L μ_η
//! ```

use crate::energy::{bulk_curvature_bounds, bulk_partials, ModelParams};
use crate::error::DivergedError;
use crate::grid::laplacian_into;
use crate::sim::PhaseState;

/// Values beyond this magnitude are treated as a blow-up.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

/// Default absolute cap returned by [`stable_dt`].
pub const DEFAULT_DT_CAP: f64 = 0.1;

const EPS: f64 = 1e-12;

/// Scratch buffers and geometry for repeated steps on one grid.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub w: usize,
    pub h: usize,
    pub dx: f64,
    pub mu_v: Vec<f64>,
    pub mu_i: Vec<f64>,
    pub mu_e: Vec<f64>,
    lap: [Vec<f64>; 3],
}

/// Borrowed view of the three fields.
#[derive(Clone, Copy)]
pub(crate) struct Fields<'a> {
    pub cv: &'a [f64],
    pub ci: &'a [f64],
    pub eta: &'a [f64],
}

pub(crate) struct FieldsMut<'a> {
    pub cv: &'a mut [f64],
    pub ci: &'a mut [f64],
    pub eta: &'a mut [f64],
}

impl Kernel {
    pub fn new(w: usize, h: usize, dx: f64) -> Self {
        let n = w * h;
        Self {
            w,
            h,
            dx,
            mu_v: vec![0.0; n],
            mu_i: vec![0.0; n],
            mu_e: vec![0.0; n],
            lap: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    /// Fills `mu_*` with the variational derivatives of `s`.
    pub fn potentials(&mut self, s: Fields<'_>, theta: &ModelParams) {
        let (w, h, dx) = (self.w, self.h, self.dx);
        let [lv, li, le] = &mut self.lap;
        laplacian_into(s.cv, lv, w, h, dx);
        laplacian_into(s.ci, li, w, h, dx);
        laplacian_into(s.eta, le, w, h, dx);
        for k in 0..w * h {
            let b = bulk_partials(s.cv[k], s.ci[k], s.eta[k], theta);
            self.mu_v[k] = b.df_dcv - theta.kappa_v * lv[k];
            self.mu_i[k] = b.df_dci - theta.kappa_i * li[k];
            self.mu_e[k] = b.df_deta - theta.kappa_eta * le[k];
        }
    }

    /// One explicit step from `s` into `out`.
    pub fn step(
        &mut self,
        s: Fields<'_>,
        out: FieldsMut<'_>,
        theta: &ModelParams,
        dt: f64,
    ) -> Result<(), DivergedError> {
        self.potentials(s, theta);
        let (w, h, dx) = (self.w, self.h, self.dx);
        let [lv, li, _] = &mut self.lap;
        laplacian_into(&self.mu_v, lv, w, h, dx);
        laplacian_into(&self.mu_i, li, w, h, dx);
        let me = &self.mu_e;
        // NaN fails every comparison, so the flag also catches it
        let mut ok = true;
        for k in 0..w * h {
            let react = -theta.r * s.cv[k] * s.ci[k] + theta.p;
            let cv = s.cv[k] + dt * (theta.m_v * lv[k] + react);
            let ci = s.ci[k] + dt * (theta.m_i * li[k] + react);
            let eta = s.eta[k] - dt * theta.l * me[k];
            out.cv[k] = cv;
            out.ci[k] = ci;
            out.eta[k] = eta;
            ok &= (cv.abs() <= DIVERGENCE_LIMIT)
                & (ci.abs() <= DIVERGENCE_LIMIT)
                & (eta.abs() <= DIVERGENCE_LIMIT);
        }
        if ok {
            return Ok(());
        }
        let bad = |v: f64| v.is_nan() || v.abs() > DIVERGENCE_LIMIT;
        for k in 0..w * h {
            for (field, v) in [("c_v", out.cv[k]), ("c_i", out.ci[k]), ("eta", out.eta[k])] {
                if bad(v) {
                    return Err(DivergedError {
                        step: None,
                        field,
                        index: k,
                        value: v,
                    });
                }
            }
        }
        unreachable!("flag and scan disagree")
    }
}

/// Advances `state` by one explicit step.
pub fn step(state: &PhaseState, theta: &ModelParams, dt: f64) -> Result<PhaseState, DivergedError> {
    let mut kernel = Kernel::new(state.width(), state.height(), state.dx());
    let mut next = state.clone();
    kernel.step(
        Fields {
            cv: state.c_v.values(),
            ci: state.c_i.values(),
            eta: state.eta.values(),
        },
        FieldsMut {
            cv: next.c_v.values_mut(),
            ci: next.c_i.values_mut(),
            eta: next.eta.values_mut(),
        },
        theta,
        dt,
    )?;
    next.time = state.time + dt;
    Ok(next)
}

/// Largest stable explicit step, capped at [`DEFAULT_DT_CAP`].
pub fn stable_dt(theta: &ModelParams, dx: f64) -> f64 {
    stable_dt_with_cap(theta, dx, DEFAULT_DT_CAP)
}

/// Explicit stability bound from the highest (checkerboard) Fourier mode,
/// whose Laplacian eigenvalue is `-8/dx²`:
///
/// ```text
/// conserved:  dt ≤ 2·dx⁴ / (8·M·(f''·dx² + 8κ) + R·dx⁴)
/// order:      dt ≤ dx² / (8·L·κ_η + 2·L·f_ηη·dx²)
/// ```
///
/// With no bulk curvature and no recombination these reduce to
/// `dx⁴/(32·M·κ)` and `dx²/(8·L·κ_η)`. The conserved bound is the neutral
/// limit, so long runs should stay below it (see [`SAFE_DT_FRACTION`]).
pub fn stable_dt_with_cap(theta: &ModelParams, dx: f64, cap: f64) -> f64 {
    let (fvv, fii, fee) = bulk_curvature_bounds(theta);
    let dx2 = dx * dx;
    let pos = |x: f64| x.max(0.0);
    let conserved = (pos(theta.m_v) * (fvv * dx2 + 8.0 * pos(theta.kappa_v)))
        .max(pos(theta.m_i) * (fii * dx2 + 8.0 * pos(theta.kappa_i)));
    let conserved = 8.0 * conserved + pos(theta.r) * dx2 * dx2;
    let order = pos(theta.l) * (8.0 * pos(theta.kappa_eta) + 2.0 * fee * dx2);
    let dt_c = 2.0 * dx2 * dx2 / conserved.max(EPS);
    let dt_o = dx2 / order.max(EPS);
    dt_c.min(dt_o).min(cap)
}

/// Fraction of [`stable_dt`] used when no explicit step is configured.
pub const SAFE_DT_FRACTION: f64 = 0.5;
