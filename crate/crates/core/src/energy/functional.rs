use crate::energy::{bulk_partials, ModelParams};
use crate::grid::{compensated_sum, wrap_next, ScalarField};
use crate::sim::PhaseState;

/// `δF/δu` for the three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalPotentials {
    pub mu_v: ScalarField,
    pub mu_i: ScalarField,
    pub mu_eta: ScalarField,
}

/// `μ_u = ∂f/∂u - κ_u ∇²u` with the 5-point Laplacian.
pub fn variational_derivatives(state: &PhaseState, theta: &ModelParams) -> ChemicalPotentials {
    let lap_v = state.c_v.laplacian();
    let lap_i = state.c_i.laplacian();
    let lap_e = state.eta.laplacian();
    let n = state.eta.len();
    let (mut mv, mut mi, mut me) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (cv, ci, eta) = (state.c_v.values(), state.c_i.values(), state.eta.values());
    for k in 0..n {
        let b = bulk_partials(cv[k], ci[k], eta[k], theta);
        mv[k] = b.df_dcv - theta.kappa_v * lap_v.values()[k];
        mi[k] = b.df_dci - theta.kappa_i * lap_i.values()[k];
        me[k] = b.df_deta - theta.kappa_eta * lap_e.values()[k];
    }
    ChemicalPotentials {
        mu_v: state.c_v.with_values(mv),
        mu_i: state.c_i.with_values(mi),
        mu_eta: state.eta.with_values(me),
    }
}

/// Squared forward-difference gradient magnitude at every pixel. Its
/// variational derivative is exactly the 5-point Laplacian used by the
/// dynamics.
fn grad_sq(u: &ScalarField) -> impl Iterator<Item = f64> + '_ {
    let (w, h) = (u.width(), u.height());
    let inv = 1.0 / u.dx();
    let v = u.values();
    (0..h).flat_map(move |j| {
        (0..w).map(move |i| {
            let c = v[j * w + i];
            let gx = (v[j * w + wrap_next(i, w)] - c) * inv;
            let gy = (v[wrap_next(j, h) * w + i] - c) * inv;
            gx * gx + gy * gy
        })
    })
}

/// `F = Σ [f + ½κ_v|∇c_v|² + ½κ_i|∇c_i|² + ½κ_η|∇η|²]·dx²`.
pub fn total_free_energy(state: &PhaseState, theta: &ModelParams) -> f64 {
    let (cv, ci, eta) = (state.c_v.values(), state.c_i.values(), state.eta.values());
    let density = grad_sq(&state.c_v)
        .zip(grad_sq(&state.c_i))
        .zip(grad_sq(&state.eta))
        .enumerate()
        .map(|(k, ((gv, gi), ge))| {
            bulk_partials(cv[k], ci[k], eta[k], theta).f
                + 0.5 * (theta.kappa_v * gv + theta.kappa_i * gi + theta.kappa_eta * ge)
        });
    let dx = state.dx();
    compensated_sum(density) * dx * dx
}
