use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One horizontal run of foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Run {
    pub row: u32,
    pub start: u32,
    pub len: u32,
}

impl Serialize for Run {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.row, self.start, self.len].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Run {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [row, start, len] = <[u32; 3]>::deserialize(d)?;
        Ok(Run { row, start, len })
    }
}

/// Binary mask stored as canonical run-length encoding: runs sorted by
/// `(row, start)`, non-empty, in bounds, and never touching within a row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Mask {
    width: u32,
    height: u32,
    runs: Vec<Run>,
}

#[derive(Deserialize)]
struct RawMask {
    width: u32,
    height: u32,
    runs: Vec<Run>,
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawMask::deserialize(d)?;
        Mask::from_runs(raw.width as usize, raw.height as usize, raw.runs)
            .map_err(serde::de::Error::custom)
    }
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width: width as u32,
            height: height as u32,
            runs: Vec::new(),
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let runs = if width == 0 {
            Vec::new()
        } else {
            (0..height as u32)
                .map(|row| Run {
                    row,
                    start: 0,
                    len: width as u32,
                })
                .collect()
        };
        Self {
            width: width as u32,
            height: height as u32,
            runs,
        }
    }

    /// Validates a run list; rejects anything that is not already canonical.
    pub fn from_runs(width: usize, height: usize, runs: Vec<Run>) -> Result<Self> {
        let mut prev: Option<Run> = None;
        for (k, r) in runs.iter().enumerate() {
            if r.len == 0 {
                return Err(Error::InvalidMask(format!("run {k} is empty")));
            }
            if r.row as usize >= height || r.start as usize + r.len as usize > width {
                return Err(Error::InvalidMask(format!("run {k} out of bounds")));
            }
            if let Some(p) = prev {
                if p.row > r.row || (p.row == r.row && p.start + p.len >= r.start) {
                    return Err(Error::InvalidMask(format!(
                        "run {k} is unsorted, overlapping or adjacent to its predecessor"
                    )));
                }
            }
            prev = Some(*r);
        }
        Ok(Self {
            width: width as u32,
            height: height as u32,
            runs,
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} pixels, got {}",
                width * height,
                bits.len()
            )));
        }
        let mut runs = Vec::new();
        for (row, line) in bits.chunks(width.max(1)).enumerate().take(height) {
            let mut i = 0;
            while i < width {
                if line[i] {
                    let start = i;
                    while i < width && line[i] {
                        i += 1;
                    }
                    runs.push(Run {
                        row: row as u32,
                        start: start as u32,
                        len: (i - start) as u32,
                    });
                } else {
                    i += 1;
                }
            }
        }
        Ok(Self {
            width: width as u32,
            height: height as u32,
            runs,
        })
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let w = self.width as usize;
        let mut bits = vec![false; w * self.height as usize];
        for r in &self.runs {
            let base = r.row as usize * w + r.start as usize;
            bits[base..base + r.len as usize].fill(true);
        }
        bits
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn height(&self) -> usize {
        self.height as usize
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn count(&self) -> usize {
        self.runs.iter().map(|r| r.len as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (row, col) = (j as u32, i as u32);
        let k = self
            .runs
            .partition_point(|r| (r.row, r.start) <= (row, col));
        k > 0 && {
            let r = self.runs[k - 1];
            r.row == row && col < r.start + r.len
        }
    }

    fn check_dims(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width(),
                self.height(),
                other.width(),
                other.height(),
            ));
        }
        Ok(())
    }

    fn combine(&self, other: &Mask, op: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        self.check_dims(other)?;
        let bits: Vec<bool> = self
            .to_bits()
            .into_iter()
            .zip(other.to_bits())
            .map(|(a, b)| op(a, b))
            .collect();
        Mask::from_bits(self.width(), self.height(), &bits)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask> {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Mask) -> Result<Mask> {
        self.combine(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Mask {
        let bits: Vec<bool> = self.to_bits().into_iter().map(|b| !b).collect();
        Mask::from_bits(self.width(), self.height(), &bits).expect("same shape")
    }

    /// Sizes of the 4-connected foreground components, in order of each
    /// component's first pixel (row-major). Not periodic.
    pub fn component_sizes(&self) -> Vec<usize> {
        let (w, h) = (self.width(), self.height());
        let bits = self.to_bits();
        let mut seen = vec![false; bits.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..bits.len() {
            if !bits[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut size = 0;
            while let Some(p) = stack.pop() {
                size += 1;
                let (i, j) = (p % w, p / w);
                let mut visit = |q: usize| {
                    if bits[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                };
                if i > 0 {
                    visit(p - 1);
                }
                if i + 1 < w {
                    visit(p + 1);
                }
                if j > 0 {
                    visit(p - w);
                }
                if j + 1 < h {
                    visit(p + w);
                }
            }
            sizes.push(size);
        }
        sizes
    }
}
