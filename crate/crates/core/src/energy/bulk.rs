//! Two-well bulk free-energy density.
//!
//! ```text
//! h(η) = (η-1)²,  j(η) = η²
//! f_s  = A_v (c_v - cv_eq)² + A_i (c_i - ci_eq)²      solid well
//! f_v  = B_v (c_v - 1)²     + B_i c_i²                void well
//! f    = h f_s + j f_v
//! ```

use crate::energy::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkPartials {
    pub f: f64,
    pub df_dcv: f64,
    pub df_dci: f64,
    pub df_deta: f64,
}

pub fn bulk_partials(cv: f64, ci: f64, eta: f64, theta: &ModelParams) -> BulkPartials {
    let h = (eta - 1.0) * (eta - 1.0);
    let j = eta * eta;
    let sv = cv - theta.cv_eq;
    let si = ci - theta.ci_eq;
    let vv = cv - 1.0;
    let f_s = theta.a_v * sv * sv + theta.a_i * si * si;
    let f_v = theta.b_v * vv * vv + theta.b_i * ci * ci;
    BulkPartials {
        f: h * f_s + j * f_v,
        df_dcv: 2.0 * (h * theta.a_v * sv + j * theta.b_v * vv),
        df_dci: 2.0 * (h * theta.a_i * si + j * theta.b_i * ci),
        df_deta: 2.0 * ((eta - 1.0) * f_s + eta * f_v),
    }
}

/// Second derivatives of `f` in `(c_v, c_i, η)`; `f_vi` is identically zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BulkHessian {
    pub vv: f64,
    pub ii: f64,
    pub ee: f64,
    pub ve: f64,
    pub ie: f64,
}

#[inline]
pub(crate) fn bulk_hessian(cv: f64, ci: f64, eta: f64, theta: &ModelParams) -> BulkHessian {
    let h = (eta - 1.0) * (eta - 1.0);
    let j = eta * eta;
    let sv = cv - theta.cv_eq;
    let si = ci - theta.ci_eq;
    let vv = cv - 1.0;
    let f_s = theta.a_v * sv * sv + theta.a_i * si * si;
    let f_v = theta.b_v * vv * vv + theta.b_i * ci * ci;
    BulkHessian {
        vv: 2.0 * (h * theta.a_v + j * theta.b_v),
        ii: 2.0 * (h * theta.a_i + j * theta.b_i),
        ee: 2.0 * (f_s + f_v),
        ve: 4.0 * ((eta - 1.0) * theta.a_v * sv + eta * theta.b_v * vv),
        ie: 4.0 * ((eta - 1.0) * theta.a_i * si + eta * theta.b_i * ci),
    }
}

/// Largest `∂²f/∂c_v²`, `∂²f/∂c_i²` and `∂²f/∂η²` over `η ∈ [0, 1]`,
/// `c ∈ [0, 1]`. Feeds the explicit time-step bound.
pub(crate) fn bulk_curvature_bounds(theta: &ModelParams) -> (f64, f64, f64) {
    let pos = |x: f64| x.max(0.0);
    let fvv = 2.0 * pos(theta.a_v).max(pos(theta.b_v));
    let fii = 2.0 * pos(theta.a_i).max(pos(theta.b_i));
    let dv = theta.cv_eq.abs().max((1.0 - theta.cv_eq).abs());
    let di = theta.ci_eq.abs().max((1.0 - theta.ci_eq).abs());
    let fee = 2.0
        * (pos(theta.a_v) * dv * dv + pos(theta.a_i) * di * di + pos(theta.b_v) + pos(theta.b_i));
    (fvv, fii, fee)
}
