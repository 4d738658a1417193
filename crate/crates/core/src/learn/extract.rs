//! Mask to phase-field extraction through a periodic Euclidean distance
//! transform.

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};
use crate::sim::{slaved_state, tanh_profile, PhaseState};

/// Squared Euclidean distance from every pixel to the nearest pixel with
/// `site[k]` set, measured on the torus. `None` when there is no site.
pub fn periodic_sq_distance(width: usize, height: usize, site: &[bool]) -> Option<Vec<f64>> {
    assert_eq!(site.len(), width * height);
    if !site.iter().any(|&s| s) {
        return None;
    }
    // Columns: circular 1-D distance to the nearest site, infinite if none.
    let mut g = vec![f64::INFINITY; width * height];
    let mut line = vec![f64::INFINITY; height];
    for i in 0..width {
        line.fill(f64::INFINITY);
        let mut last: Option<usize> = None;
        for t in 0..2 * height {
            let j = t % height;
            if site[j * width + i] {
                last = Some(t);
            }
            if let Some(l) = last {
                line[j] = line[j].min((t - l) as f64);
            }
        }
        let mut next: Option<usize> = None;
        for t in (0..2 * height).rev() {
            let j = t % height;
            if site[j * width + i] {
                next = Some(t);
            }
            if let Some(n) = next {
                line[j] = line[j].min((n - t) as f64);
            }
        }
        for j in 0..height {
            g[j * width + i] = line[j] * line[j];
        }
    }
    // Rows: lower envelope of parabolas over three periods.
    let mut out = vec![0.0; width * height];
    let n = width as i64;
    let mut v: Vec<i64> = Vec::with_capacity(3 * width);
    let mut z: Vec<f64> = Vec::with_capacity(3 * width + 1);
    for j in 0..height {
        let row = &g[j * width..(j + 1) * width];
        let f = |q: i64| row[q.rem_euclid(n) as usize];
        v.clear();
        z.clear();
        for q in -n..2 * n {
            let fq = f(q);
            if !fq.is_finite() {
                continue;
            }
            loop {
                let Some(&p) = v.last() else {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                };
                let s = ((fq + (q * q) as f64) - (f(p) + (p * p) as f64)) / (2 * (q - p)) as f64;
                if s <= *z.last().expect("z tracks v") {
                    v.pop();
                    z.pop();
                } else {
                    v.push(q);
                    z.push(s);
                    break;
                }
            }
        }
        let mut k = 0;
        for (i, o) in out[j * width..(j + 1) * width].iter_mut().enumerate() {
            let x = i as f64;
            while k + 1 < v.len() && z[k + 1] < x {
                k += 1;
            }
            let d = x - v[k] as f64;
            *o = d * d + f(v[k]);
        }
    }
    Some(out)
}

/// Signed distance to the mask boundary in pixels, positive inside. The
/// boundary sits halfway between a foreground pixel centre and its nearest
/// background pixel centre, so `d >= 0.5` inside and `d <= -0.5` outside.
/// `None` when the mask is empty or full.
pub fn signed_distance(mask: &Mask) -> Option<Vec<f64>> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.to_bits();
    let background: Vec<bool> = bits.iter().map(|b| !b).collect();
    let to_bg = periodic_sq_distance(w, h, &background)?;
    let to_fg = periodic_sq_distance(w, h, &bits)?;
    Some(
        bits.iter()
            .zip(to_bg.iter().zip(&to_fg))
            .map(|(&inside, (&db, &df))| {
                if inside {
                    db.sqrt() - 0.5
                } else {
                    0.5 - df.sqrt()
                }
            })
            .collect(),
    )
}

/// `η = ½(1 + tanh(d/w))` of the signed boundary distance; empty masks give
/// `η ≡ 0` and full masks `η ≡ 1`.
pub fn extract_eta(mask: &Mask, dx: f64, interface_width: f64) -> Result<ScalarField> {
    if !(interface_width.is_finite() && interface_width > 0.0) {
        return Err(Error::Config(format!(
            "interface width must be positive, got {interface_width}"
        )));
    }
    let (w, h) = (mask.width(), mask.height());
    let values = match signed_distance(mask) {
        Some(d) => d
            .into_iter()
            .map(|d| tanh_profile(d * dx, interface_width))
            .collect(),
        None => vec![if mask.is_empty() { 0.0 } else { 1.0 }; w * h],
    };
    ScalarField::new(w, h, dx, values)
}

/// Phase state whose order parameter follows the mask and whose
/// concentrations sit at the well values of each phase.
pub fn extract_state(
    mask: &Mask,
    theta: &ModelParams,
    dx: f64,
    interface_width: f64,
) -> Result<PhaseState> {
    slaved_state(extract_eta(mask, dx, interface_width)?, theta)
}
