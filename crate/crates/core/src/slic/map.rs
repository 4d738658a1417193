use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Mask;

/// Per-pixel superpixel labels; every label in `0..n_labels` is used and
/// its pixels form one 4-connected region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    n_labels: u32,
}

/// Visits the 4-connected region containing `start` whose pixels satisfy
/// `same`, marking `seen`. Not periodic.
pub(crate) fn flood(
    width: usize,
    height: usize,
    start: usize,
    seen: &mut [bool],
    stack: &mut Vec<usize>,
    mut same: impl FnMut(usize) -> bool,
    mut visit: impl FnMut(usize),
) {
    seen[start] = true;
    stack.push(start);
    while let Some(p) = stack.pop() {
        visit(p);
        let (i, j) = (p % width, p / width);
        let mut push = |q: usize| {
            if !seen[q] && same(q) {
                seen[q] = true;
                stack.push(q);
            }
        };
        if i > 0 {
            push(p - 1);
        }
        if i + 1 < width {
            push(p + 1);
        }
        if j > 0 {
            push(p - width);
        }
        if j + 1 < height {
            push(p + width);
        }
    }
}

impl SuperpixelMap {
    /// Validates the partition, coverage and connectivity invariants.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::Format(format!(
                "{width}x{height} superpixel map needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        let n_labels = labels.iter().max().map_or(0, |&m| m + 1);
        let mut regions = vec![0u32; n_labels as usize];
        let mut seen = vec![false; labels.len()];
        let mut stack = Vec::new();
        for p in 0..labels.len() {
            if seen[p] {
                continue;
            }
            let l = labels[p];
            regions[l as usize] += 1;
            if regions[l as usize] > 1 {
                return Err(Error::Format(format!("label {l} is not 4-connected")));
            }
            flood(width, height, p, &mut seen, &mut stack, |q| labels[q] == l, |_| {});
        }
        if let Some(l) = regions.iter().position(|&r| r == 0) {
            return Err(Error::Format(format!("label {l} is unused")));
        }
        Ok(Self {
            width,
            height,
            labels,
            n_labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_labels(&self) -> u32 {
        self.n_labels
    }

    pub fn label_at(&self, i: usize, j: usize) -> u32 {
        self.labels[j * self.width + i]
    }

    /// Pixel count of every label.
    pub fn areas(&self) -> Vec<usize> {
        let mut a = vec![0; self.n_labels as usize];
        for &l in &self.labels {
            a[l as usize] += 1;
        }
        a
    }

    /// Union of the listed labels' pixels.
    pub fn select(&self, labels: impl IntoIterator<Item = u32>) -> Result<Mask> {
        let mut chosen = vec![false; self.n_labels as usize];
        for l in labels {
            if l >= self.n_labels {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    n_labels: self.n_labels,
                });
            }
            chosen[l as usize] = true;
        }
        let bits: Vec<bool> = self.labels.iter().map(|&l| chosen[l as usize]).collect();
        Mask::from_bits(self.width, self.height, &bits)
    }

    /// Maximal same-label runs `[row, start, len, label]` in row-major order.
    pub fn runs(&self) -> Vec<[u32; 4]> {
        let mut out = Vec::new();
        for (j, row) in self.labels.chunks(self.width).enumerate() {
            let mut start = 0;
            for i in 1..=row.len() {
                if i == row.len() || row[i] != row[start] {
                    out.push([j as u32, start as u32, (i - start) as u32, row[start]]);
                    start = i;
                }
            }
        }
        out
    }

    pub fn from_runs(width: usize, height: usize, runs: &[[u32; 4]]) -> Result<Self> {
        let mut labels = vec![u32::MAX; width * height];
        let mut expected = (0u32, 0u32);
        for (k, &[row, start, len, label]) in runs.iter().enumerate() {
            if (row, start) != expected || len == 0 || start as usize + len as usize > width {
                return Err(Error::Format(format!("run {k} breaks the canonical run order")));
            }
            let base = row as usize * width + start as usize;
            labels[base..base + len as usize].fill(label);
            expected = if (start + len) as usize == width {
                (row + 1, 0)
            } else {
                (row, start + len)
            };
        }
        if expected != (height as u32, 0) {
            return Err(Error::Format("runs do not cover the image".into()));
        }
        Self::new(width, height, labels)
    }

    /// Compact canonical JSON, the form hashed by [`Self::content_hash`].
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("superpixel map: {e}")))
    }

    /// Lowercase hex SHA-256 of the canonical JSON.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Writes the canonical JSON, byte-identical to what the service stores.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for SuperpixelMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SuperpixelMap", 4)?;
        st.serialize_field("width", &self.width)?;
        st.serialize_field("height", &self.height)?;
        st.serialize_field("n_labels", &self.n_labels)?;
        st.serialize_field("runs", &self.runs())?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    width: usize,
    height: usize,
    n_labels: u32,
    runs: Vec<[u32; 4]>,
}

impl<'de> Deserialize<'de> for SuperpixelMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawMap::deserialize(d)?;
        let map = SuperpixelMap::from_runs(raw.width, raw.height, &raw.runs)
            .map_err(serde::de::Error::custom)?;
        if map.n_labels != raw.n_labels {
            return Err(serde::de::Error::custom(format!(
                "n_labels is {} but runs use {}",
                raw.n_labels, map.n_labels
            )));
        }
        Ok(map)
    }
}

/// Pixels whose right or bottom neighbour carries a different label.
pub fn boundaries(map: &SuperpixelMap) -> Mask {
    let (w, h) = (map.width, map.height);
    let l = &map.labels;
    let bits: Vec<bool> = (0..w * h)
        .map(|p| {
            let (i, j) = (p % w, p / w);
            (i + 1 < w && l[p + 1] != l[p]) || (j + 1 < h && l[p + w] != l[p])
        })
        .collect();
    Mask::from_bits(w, h, &bits).expect("map shape")
}
