use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;

/// Eraser polyline in image coordinates, `(0, 0)` being the top-left
/// corner of the image and pixel `(i, j)` centred at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrushStroke {
    pub points: Vec<[f64; 2]>,
    pub radius: f64,
}

fn segment_dist_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    ex * ex + ey * ey
}

/// A pixel is erased when its centre lies within `radius` of the stroke's
/// polyline (a single point for one-point strokes).
pub fn rasterize_strokes(width: usize, height: usize, strokes: &[BrushStroke]) -> Result<Mask> {
    let mut bits = vec![false; width * height];
    for (n, s) in strokes.iter().enumerate() {
        if s.points.is_empty() {
            return Err(Error::schema(format!("strokes[{n}].points"), "stroke has no points"));
        }
        if !(s.radius.is_finite() && s.radius >= 0.0) {
            return Err(Error::schema(format!("strokes[{n}].radius"), "must be finite and >= 0"));
        }
        if s.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::schema(format!("strokes[{n}].points"), "coordinates must be finite"));
        }
        let segments: Vec<([f64; 2], [f64; 2])> = if s.points.len() == 1 {
            vec![(s.points[0], s.points[0])]
        } else {
            s.points.windows(2).map(|w| (w[0], w[1])).collect()
        };
        let r2 = s.radius * s.radius;
        for (a, b) in segments {
            let lo_x = (a[0].min(b[0]) - s.radius - 0.5).floor().max(0.0) as usize;
            let hi_x = (a[0].max(b[0]) + s.radius).ceil().min(width as f64) as usize;
            let lo_y = (a[1].min(b[1]) - s.radius - 0.5).floor().max(0.0) as usize;
            let hi_y = (a[1].max(b[1]) + s.radius).ceil().min(height as f64) as usize;
            for j in lo_y..hi_y {
                for i in lo_x..hi_x {
                    let c = [i as f64 + 0.5, j as f64 + 0.5];
                    if segment_dist_sq(c, a, b) <= r2 {
                        bits[j * width + i] = true;
                    }
                }
            }
        }
    }
    Mask::from_bits(width, height, &bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_a_disc() {
        let s = BrushStroke {
            points: vec![[5.5, 5.5]],
            radius: 1.0,
        };
        let m = rasterize_strokes(11, 11, &[s]).unwrap();
        assert_eq!(m.count(), 5);
        assert!(m.contains(5, 5) && m.contains(4, 5) && m.contains(5, 6));
    }

    #[test]
    fn horizontal_segment_is_a_band() {
        let s = BrushStroke {
            points: vec![[2.5, 4.5], [8.5, 4.5]],
            radius: 0.0,
        };
        let m = rasterize_strokes(10, 10, &[s]).unwrap();
        assert_eq!(m.count(), 7);
    }
}
