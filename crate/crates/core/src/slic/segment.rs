use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::slic::{enforce_connectivity, SuperpixelMap};

pub const DEFAULT_MAX_ITER: usize = 10;

#[derive(Debug, Clone, Copy)]
struct Center {
    x: f64,
    y: f64,
    g: f64,
}

/// SLIC over-segmentation of a grayscale image into roughly `k` compact
/// superpixels.
///
/// Intensities are scaled to `[0, 100]`; the distance between a pixel and a
/// centre is `sqrt(d_g² + (d_xy/S)²·m²)` with `S = sqrt(N/k)`, searched in a
/// `2S`×`2S` window around each centre. Components smaller than `N/k/4` are
/// merged away afterwards, so the label count may differ from `k`.
pub fn slic_segment(image: &GrayImage, k: usize, m: f64, max_iter: usize) -> Result<SuperpixelMap> {
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    if k < 2 || k > n / 4 {
        return Err(Error::InvalidK(format!(
            "k must lie in [2, {}] for a {w}x{h} image, got {k}",
            n / 4
        )));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::schema("m", format!("compactness must be positive, got {m}")));
    }
    let gray: Vec<f64> = image
        .pixels()
        .iter()
        .map(|&p| p as f64 * 100.0 / 255.0)
        .collect();
    let at = |i: usize, j: usize| gray[j * w + i];
    let s = (n as f64 / k as f64).sqrt();

    // Regular grid with about `k` cells, matched to the aspect ratio.
    let nx = ((w as f64 / s).round() as usize).clamp(1, w);
    let ny = ((h as f64 / s).round() as usize).clamp(1, h);
    let gradient = |i: usize, j: usize| {
        let (l, r) = (i.saturating_sub(1), (i + 1).min(w - 1));
        let (u, d) = (j.saturating_sub(1), (j + 1).min(h - 1));
        let gx = at(r, j) - at(l, j);
        let gy = at(i, d) - at(i, u);
        gx * gx + gy * gy
    };
    let mut centers = Vec::with_capacity(nx * ny);
    for cy in 0..ny {
        for cx in 0..nx {
            let i0 = ((cx as f64 + 0.5) * w as f64 / nx as f64) as usize;
            let j0 = ((cy as f64 + 0.5) * h as f64 / ny as f64) as usize;
            let (mut bi, mut bj) = (i0, j0);
            let mut best = gradient(i0, j0);
            for j in j0.saturating_sub(1)..=(j0 + 1).min(h - 1) {
                for i in i0.saturating_sub(1)..=(i0 + 1).min(w - 1) {
                    let g = gradient(i, j);
                    if g < best {
                        (best, bi, bj) = (g, i, j);
                    }
                }
            }
            centers.push(Center {
                x: bi as f64,
                y: bj as f64,
                g: at(bi, bj),
            });
        }
    }

    let weight = (m / s) * (m / s);
    let radius = s.ceil() as i64;
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..max_iter.max(1) {
        labels.fill(u32::MAX);
        dist.fill(f64::INFINITY);
        for (c, ctr) in centers.iter().enumerate() {
            let (ci, cj) = (ctr.x.round() as i64, ctr.y.round() as i64);
            let i_lo = (ci - radius).max(0) as usize;
            let i_hi = (ci + radius).min(w as i64 - 1) as usize;
            let j_lo = (cj - radius).max(0) as usize;
            let j_hi = (cj + radius).min(h as i64 - 1) as usize;
            for j in j_lo..=j_hi {
                for i in i_lo..=i_hi {
                    let p = j * w + i;
                    let dg = gray[p] - ctr.g;
                    let (dx, dy) = (i as f64 - ctr.x, j as f64 - ctr.y);
                    let d = dg * dg + (dx * dx + dy * dy) * weight;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = c as u32;
                    }
                }
            }
        }
        // Pixels no window reached take the nearest centre overall.
        for p in 0..n {
            if labels[p] != u32::MAX {
                continue;
            }
            let (i, j) = ((p % w) as f64, (p / w) as f64);
            let mut best = (f64::INFINITY, 0);
            for (c, ctr) in centers.iter().enumerate() {
                let dg = gray[p] - ctr.g;
                let d = dg * dg + ((i - ctr.x).powi(2) + (j - ctr.y).powi(2)) * weight;
                if d < best.0 {
                    best = (d, c);
                }
            }
            labels[p] = best.1 as u32;
        }
        let mut sums = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let e = &mut sums[l as usize];
            e.0 += (p % w) as f64;
            e.1 += (p / w) as f64;
            e.2 += gray[p];
            e.3 += 1;
        }
        for (ctr, (sx, sy, sg, cnt)) in centers.iter_mut().zip(sums) {
            if cnt > 0 {
                let c = cnt as f64;
                *ctr = Center {
                    x: sx / c,
                    y: sy / c,
                    g: sg / c,
                };
            }
        }
    }
    let min_size = n / k / 4;
    enforce_connectivity(w, h, &labels, min_size.max(1))
}
