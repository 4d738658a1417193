use crate::error::{Error, Result};
use crate::grid::Mask;

/// Periodic 2-D grid of `f64` samples, row-major, square spacing `dx`.
///
/// Index `(i, j)` is column `i`, row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    dx: f64,
    values: Vec<f64>,
}

pub const MIN_SIDE: usize = 4;

pub(crate) fn check_shape(width: usize, height: usize, dx: f64) -> Result<()> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::InvalidGrid(format!(
            "grid must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
        )));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
    }
    Ok(())
}

impl ScalarField {
    pub fn new(width: usize, height: usize, dx: f64, values: Vec<f64>) -> Result<Self> {
        check_shape(width, height, dx)?;
        if values.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {k}")));
        }
        Ok(Self {
            width,
            height,
            dx,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, dx: f64, value: f64) -> Result<Self> {
        Self::new(width, height, dx, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        dx: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i, j));
            }
        }
        Self::new(width, height, dx, values)
    }

    /// Builds a field sharing shape and spacing with `self`; the caller
    /// guarantees length and finiteness.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            width: self.width,
            height: self.height,
            dx: self.dx,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height && self.dx == other.dx
    }

    /// 5-point periodic Laplacian.
    pub fn laplacian(&self) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        laplacian_into(&self.values, &mut out, self.width, self.height, self.dx);
        self.with_values(out)
    }

    /// Arithmetic mean with compensated summation in row-major order.
    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Pixels with value `>= t`.
    pub fn threshold(&self, t: f64) -> Mask {
        let bits: Vec<bool> = self.values.iter().map(|&v| v >= t).collect();
        Mask::from_bits(self.width, self.height, &bits).expect("field shape is a valid mask shape")
    }

    /// Left-right mirror image.
    pub fn mirrored_x(&self) -> ScalarField {
        let w = self.width;
        let mut out = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(w) {
            out.extend(row.iter().rev());
        }
        self.with_values(out)
    }

    /// Periodic translation: the value at `(i, j)` moves to `(i + di, j + dj)`.
    pub fn rolled(&self, di: usize, dj: usize) -> ScalarField {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; self.values.len()];
        for j in 0..h {
            for i in 0..w {
                out[((j + dj) % h) * w + (i + di) % w] = self.values[j * w + i];
            }
        }
        self.with_values(out)
    }
}

/// Neumaier-compensated sum; order is the iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Periodic predecessor of index `k` in `0..n`.
#[inline]
pub(crate) fn wrap_prev(k: usize, n: usize) -> usize {
    if k == 0 {
        n - 1
    } else {
        k - 1
    }
}

#[inline]
pub(crate) fn wrap_next(k: usize, n: usize) -> usize {
    if k + 1 == n {
        0
    } else {
        k + 1
    }
}

/// 5-point periodic Laplacian of a `w`×`h` row-major array into `dst`,
/// evaluated as `(left + right + up + down - 4·centre) / dx²`.
pub(crate) fn laplacian_into(src: &[f64], dst: &mut [f64], w: usize, h: usize, dx: f64) {
    let inv = 1.0 / (dx * dx);
    for j in 0..h {
        let row = j * w;
        let c = &src[row..row + w];
        let u = &src[wrap_prev(j, h) * w..][..w];
        let d = &src[wrap_next(j, h) * w..][..w];
        let o = &mut dst[row..row + w];
        o[0] = (c[w - 1] + c[1] + u[0] + d[0] - 4.0 * c[0]) * inv;
        for (((o, c), u), d) in o[1..w - 1]
            .iter_mut()
            .zip(c.windows(3))
            .zip(&u[1..w - 1])
            .zip(&d[1..w - 1])
        {
            *o = (c[0] + c[2] + u + d - 4.0 * c[1]) * inv;
        }
        o[w - 1] = (c[w - 2] + c[0] + u[w - 1] + d[w - 1] - 4.0 * c[w - 1]) * inv;
    }
}
