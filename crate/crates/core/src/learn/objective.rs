//! Training loss and its gradient through the unrolled explicit scheme.
//!
//! The reverse pass walks the recorded states backwards. With `a` the
//! adjoint of the state after a step and `Δ` the (symmetric) periodic
//! Laplacian:
//!
//! ```text
//! g_v = dt·M_v·Δa_v    g_i = dt·M_i·Δa_i    g_η = -dt·L·a_η
//! a_v ← a_v - dt·R·c_i·(a_v + a_i) + g_v f_vv + g_η f_vη - κ_v Δg_v
//! a_i ← a_i - dt·R·c_v·(a_v + a_i) + g_i f_ii + g_η f_iη - κ_i Δg_i
//! a_η ← a_η + g_v f_vη + g_i f_iη + g_η f_ηη - κ_η Δg_η
//! ```

use rayon::prelude::*;

use crate::energy::{bulk_hessian, ModelParams, Param, N_PARAMS};
use crate::error::{DivergedError, Error, Result};
use crate::grid::{compensated_sum, laplacian_into, ScalarField};
use crate::learn::{extract_eta, Frame, GradientMode, LossReport, TrainConfig};
use crate::sim::{slaved_state, Fields, FieldsMut, Kernel, PhaseState, Simulator};

enum Start {
    /// Order parameter from a mask; concentrations follow `θ`.
    Eta(ScalarField),
    State(PhaseState),
}

impl Start {
    fn state(&self, theta: &ModelParams) -> PhaseState {
        match self {
            Start::Eta(eta) => slaved_state(eta.clone(), theta).expect("shape checked on entry"),
            Start::State(s) => s.clone(),
        }
    }
}

struct Prepared {
    start: Start,
    target: Vec<f64>,
    k: usize,
    dims: (usize, usize),
}

/// Recorded forward states, one flat buffer per pair holding `k + 1` states
/// as consecutive `c_v`, `c_i`, `η` blocks. Reused across evaluations.
#[derive(Debug, Default)]
pub struct Tape(Vec<Vec<f64>>);

/// Loss of a [`TrainConfig`] with its masks already extracted.
pub struct Objective<'a> {
    config: &'a TrainConfig,
    pairs: Vec<Prepared>,
}

impl<'a> Objective<'a> {
    pub fn new(config: &'a TrainConfig) -> Result<Self> {
        config.validate()?;
        let (dx, w) = (config.dx, config.interface_width);
        let pairs = config
            .pairs
            .iter()
            .map(|pair| {
                let start = match &pair.initial {
                    Frame::Mask(m) => Start::Eta(extract_eta(m, dx, w)?),
                    Frame::State(s) => Start::State(s.clone()),
                };
                let target = match &pair.target {
                    Frame::Mask(m) => extract_eta(m, dx, w)?.into_values(),
                    Frame::State(s) => s.eta.values().to_vec(),
                };
                let (sw, sh) = match &start {
                    Start::Eta(e) => (e.width(), e.height()),
                    Start::State(s) => (s.width(), s.height()),
                };
                Ok(Prepared {
                    start,
                    target,
                    k: pair.k,
                    dims: (sw, sh),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, pairs })
    }

    pub fn config(&self) -> &TrainConfig {
        self.config
    }

    fn dx(&self, pair: &Prepared) -> f64 {
        match &pair.start {
            Start::Eta(e) => e.dx(),
            Start::State(s) => s.dx(),
        }
    }

    fn squared_error(pair: &Prepared, eta: &[f64]) -> f64 {
        let sq = compensated_sum(eta.iter().zip(&pair.target).map(|(e, t)| (e - t) * (e - t)));
        sq / pair.target.len() as f64
    }

    fn run_pair(&self, pair: &Prepared, theta: &ModelParams) -> Result<f64, DivergedError> {
        let mut sim = Simulator::new(pair.start.state(theta));
        for _ in 0..pair.k {
            sim.advance(theta, self.config.dt)?;
        }
        Ok(Self::squared_error(pair, sim.state().eta.values()))
    }

    /// Same trajectory as [`Self::run_pair`], stepping directly into `buf`.
    fn record_pair(
        &self,
        pair: &Prepared,
        theta: &ModelParams,
        buf: &mut Vec<f64>,
    ) -> Result<f64, DivergedError> {
        let (w, h) = pair.dims;
        let n = w * h;
        let s0 = pair.start.state(theta);
        buf.resize(3 * n * (pair.k + 1), 0.0);
        buf[..n].copy_from_slice(s0.c_v.values());
        buf[n..2 * n].copy_from_slice(s0.c_i.values());
        buf[2 * n..3 * n].copy_from_slice(s0.eta.values());
        let mut kernel = Kernel::new(w, h, s0.dx());
        for step in 0..pair.k {
            let (done, rest) = buf.split_at_mut(3 * n * (step + 1));
            let src = &done[3 * n * step..];
            let (cv, rest) = rest.split_at_mut(n);
            let (ci, rest) = rest.split_at_mut(n);
            let eta = &mut rest[..n];
            kernel
                .step(
                    Fields {
                        cv: &src[..n],
                        ci: &src[n..2 * n],
                        eta: &src[2 * n..3 * n],
                    },
                    FieldsMut { cv, ci, eta },
                    theta,
                    self.config.dt,
                )
                .map_err(|e| DivergedError {
                    step: Some(step + 1),
                    ..e
                })?;
        }
        let last = &buf[3 * n * pair.k..];
        Ok(Self::squared_error(pair, &last[2 * n..3 * n]))
    }

    fn report(&self, theta: &ModelParams, mismatch: Option<f64>) -> LossReport {
        let (below, above) = self.config.bounds.violations(theta);
        let penalty_lo = self.config.lambda1 * below;
        let penalty_hi = self.config.lambda2 * above;
        match mismatch {
            Some(m) if (m + penalty_lo + penalty_hi).is_finite() => LossReport {
                mismatch: m,
                penalty_lo,
                penalty_hi,
                total: m + penalty_lo + penalty_hi,
                diverged: false,
            },
            _ => LossReport {
                mismatch: f64::INFINITY,
                penalty_lo,
                penalty_hi,
                total: f64::INFINITY,
                diverged: true,
            },
        }
    }

    fn collect(&self, theta: &ModelParams, runs: Vec<Result<f64, DivergedError>>) -> LossReport {
        let per_pair: Option<Vec<f64>> = runs.into_iter().map(|r| r.ok()).collect();
        let mismatch = per_pair.map(|v| compensated_sum(v) / self.pairs.len() as f64);
        self.report(theta, mismatch)
    }

    pub fn loss(&self, theta: &ModelParams) -> LossReport {
        if !theta.is_finite() {
            return self.report(theta, None);
        }
        let runs = self
            .pairs
            .par_iter()
            .map(|p| self.run_pair(p, theta))
            .collect();
        self.collect(theta, runs)
    }

    /// Loss at `theta`, recording the forward states into `tape`. The tape
    /// is only meaningful when the returned report is finite.
    pub fn loss_recorded(&self, theta: &ModelParams, tape: &mut Tape) -> LossReport {
        if !theta.is_finite() {
            return self.report(theta, None);
        }
        tape.0.resize_with(self.pairs.len(), Vec::new);
        let runs = self
            .pairs
            .par_iter()
            .zip(tape.0.par_iter_mut())
            .map(|(p, buf)| self.record_pair(p, theta, buf))
            .collect();
        self.collect(theta, runs)
    }

    /// `∂total/∂θ` in the configured mode.
    pub fn gradient(&self, theta: &ModelParams) -> Result<[f64; N_PARAMS]> {
        match self.config.gradient_mode {
            GradientMode::CentralFd => self.gradient_fd(theta),
            GradientMode::Adjoint => {
                let mut tape = Tape::default();
                if self.loss_recorded(theta, &mut tape).is_finite() {
                    Ok(self.gradient_adjoint(theta, &tape))
                } else {
                    Err(Error::GradientUnavailable {
                        param: "all",
                        reason: "simulation diverged at the current parameters".into(),
                    })
                }
            }
        }
    }

    /// Central differences with `h_p = max(1e-6, 1e-6·|θ_p|)`.
    pub fn gradient_fd(&self, theta: &ModelParams) -> Result<[f64; N_PARAMS]> {
        let comps: Vec<Result<f64>> = Param::ALL
            .par_iter()
            .map(|&p| {
                let v = theta.get(p);
                let h = (1e-6 * v.abs()).max(1e-6);
                let (up, down) = (theta.with(p, v + h), theta.with(p, v - h));
                let (fu, fd) = (self.loss(&up), self.loss(&down));
                if !(fu.is_finite() && fd.is_finite()) {
                    return Err(Error::GradientUnavailable {
                        param: p.name(),
                        reason: "simulation diverged at a perturbed point".into(),
                    });
                }
                Ok((fu.total - fd.total) / (up.get(p) - down.get(p)))
            })
            .collect();
        let mut g = [0.0; N_PARAMS];
        for (slot, c) in g.iter_mut().zip(comps) {
            *slot = c?;
        }
        Ok(g)
    }

    /// Exact gradient of the discrete loss by reverse accumulation over a
    /// tape recorded at `theta`.
    pub fn gradient_adjoint(&self, theta: &ModelParams, tape: &Tape) -> [f64; N_PARAMS] {
        assert_eq!(tape.0.len(), self.pairs.len(), "tape from another objective");
        let scale = 2.0 / self.pairs.len() as f64;
        let parts: Vec<[f64; N_PARAMS]> = self
            .pairs
            .par_iter()
            .zip(&tape.0)
            .map(|(pair, states)| self.backward(pair, theta, states, scale))
            .collect();
        let mut g = self
            .config
            .bounds
            .penalty_gradient(theta, self.config.lambda1, self.config.lambda2);
        for (p, slot) in g.iter_mut().enumerate() {
            *slot += compensated_sum(parts.iter().map(|part| part[p]));
        }
        g
    }

    fn backward(
        &self,
        pair: &Prepared,
        theta: &ModelParams,
        states: &[f64],
        scale: f64,
    ) -> [f64; N_PARAMS] {
        let (w, h) = pair.dims;
        let dx = self.dx(pair);
        let n = w * h;
        let dt = self.config.dt;
        let th = theta;
        let weight = scale / n as f64;
        let state = |step: usize| {
            let s = &states[3 * n * step..3 * n * (step + 1)];
            (&s[..n], &s[n..2 * n], &s[2 * n..])
        };

        let mut a_v = vec![0.0; n];
        let mut a_i = vec![0.0; n];
        let mut a_e: Vec<f64> = state(pair.k)
            .2
            .iter()
            .zip(&pair.target)
            .map(|(e, t)| weight * (e - t))
            .collect();
        let mut next = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut lap_a = [vec![0.0; n], vec![0.0; n]];
        let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut lap_g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut kernel = Kernel::new(w, h, dx);
        // Raw per-step sums; the constant factors are applied at the end.
        let mut acc = [0.0; N_PARAMS];

        for step in (0..pair.k).rev() {
            let (cv, ci, eta) = state(step);
            kernel.potentials(Fields { cv, ci, eta }, th);
            laplacian_into(&a_v, &mut lap_a[0], w, h, dx);
            laplacian_into(&a_i, &mut lap_a[1], w, h, dx);
            for x in 0..n {
                g[0][x] = dt * th.m_v * lap_a[0][x];
                g[1][x] = dt * th.m_i * lap_a[1][x];
                g[2][x] = -dt * th.l * a_e[x];
            }
            for (src, dst) in g.iter().zip(lap_g.iter_mut()) {
                laplacian_into(src, dst, w, h, dx);
            }
            let [nv_buf, ni_buf, ne_buf] = &mut next;
            let (nv, ni, ne) = (&mut nv_buf[..n], &mut ni_buf[..n], &mut ne_buf[..n]);
            let (av, ai, ae) = (&a_v[..n], &a_i[..n], &a_e[..n]);
            let (cv, ci, eta) = (&cv[..n], &ci[..n], &eta[..n]);
            let (mv, mi, me) = (&kernel.mu_v[..n], &kernel.mu_i[..n], &kernel.mu_e[..n]);
            let (lav, lai) = (&lap_a[0][..n], &lap_a[1][..n]);
            let (gv, gi, ge) = (&g[0][..n], &g[1][..n], &g[2][..n]);
            let (lgv, lgi, lge) = (&lap_g[0][..n], &lap_g[1][..n], &lap_g[2][..n]);
            for x in 0..n {
                let q = av[x] + ai[x];
                let hs = bulk_hessian(cv[x], ci[x], eta[x], th);
                nv[x] = av[x] - dt * th.r * ci[x] * q + gv[x] * hs.vv + ge[x] * hs.ve
                    - th.kappa_v * lgv[x];
                ni[x] = ai[x] - dt * th.r * cv[x] * q + gi[x] * hs.ii + ge[x] * hs.ie
                    - th.kappa_i * lgi[x];
                ne[x] = ae[x] + gv[x] * hs.ve + gi[x] * hs.ie + ge[x] * hs.ee
                    - th.kappa_eta * lge[x];
            }
            let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
            acc[0] += dot(mv, lav);
            acc[1] += dot(mi, lai);
            acc[2] += dot(ae, me);
            acc[3] += dot(cv, lgv);
            acc[4] += dot(ci, lgi);
            acc[5] += dot(eta, lge);
            let (cv_eq, ci_eq) = (th.cv_eq, th.ci_eq);
            let mut s = [0.0; 8];
            for x in 0..n {
                let (c_v, c_i, e) = (cv[x], ci[x], eta[x]);
                let (gv, gi, ge) = (gv[x], gi[x], ge[x]);
                let q = av[x] + ai[x];
                let em = e - 1.0;
                let hh = em * em;
                let jj = e * e;
                let sv = c_v - cv_eq;
                let si = c_i - ci_eq;
                let vv = c_v - 1.0;
                s[0] += gv * hh * sv + ge * em * sv * sv;
                s[1] += gi * hh * si + ge * em * si * si;
                s[2] += gv * jj * vv + ge * e * vv * vv;
                s[3] += gi * jj * c_i + ge * e * c_i * c_i;
                s[4] += gv * hh + 2.0 * ge * em * sv;
                s[5] += gi * hh + 2.0 * ge * em * si;
                s[6] += q * c_v * c_i;
                s[7] += q;
            }
            for (a, v) in acc[6..].iter_mut().zip(s) {
                *a += v;
            }
            std::mem::swap(&mut a_v, nv_buf);
            std::mem::swap(&mut a_i, ni_buf);
            std::mem::swap(&mut a_e, ne_buf);
        }

        let factor = [
            dt,
            dt,
            -dt,
            -1.0,
            -1.0,
            -1.0,
            2.0,
            2.0,
            2.0,
            2.0,
            -2.0 * th.a_v,
            -2.0 * th.a_i,
            -dt,
            dt,
        ];
        let mut out = [0.0; N_PARAMS];
        for p in 0..N_PARAMS {
            out[p] = factor[p] * acc[p];
        }
        if let Start::Eta(eta0) = &pair.start {
            // c_v(0) = cv_eq + (1 - cv_eq)·η0 and c_i(0) = ci_eq·(1 - η0)
            let e0 = eta0.values();
            out[10] += compensated_sum(a_v.iter().zip(e0).map(|(a, e)| a * (1.0 - e)));
            out[11] += compensated_sum(a_i.iter().zip(e0).map(|(a, e)| a * (1.0 - e)));
        }
        out
    }
}

/// Loss of `theta` under `config`.
pub fn loss(theta: &ModelParams, config: &TrainConfig) -> Result<LossReport> {
    Ok(Objective::new(config)?.loss(theta))
}

/// Gradient of the total loss in the configured mode.
pub fn grad(theta: &ModelParams, config: &TrainConfig) -> Result<[f64; N_PARAMS]> {
    Objective::new(config)?.gradient(theta)
}
