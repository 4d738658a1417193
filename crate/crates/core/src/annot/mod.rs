//! Superpixel annotations: selections minus eraser pixels, their masks, the
//! IOU metric and canonical JSON persistence.

mod brush;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::slic::SuperpixelMap;

pub use brush::{rasterize_strokes, BrushStroke};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub frame_id: String,
    /// Content hash of the superpixel map the labels index.
    pub superpixel_ref: String,
    /// Sorted, duplicate-free superpixel labels marked as void.
    pub selected: Vec<u32>,
    pub erased: Mask,
    pub author: String,
    /// ISO-8601.
    pub timestamp: String,
}

impl Annotation {
    /// Empty annotation of `map`.
    pub fn new(frame_id: impl Into<String>, map: &SuperpixelMap) -> Self {
        Self {
            frame_id: frame_id.into(),
            superpixel_ref: map.content_hash(),
            selected: Vec::new(),
            erased: Mask::empty(map.width(), map.height()),
            author: String::new(),
            timestamp: String::new(),
        }
    }

    /// Toggles membership of `label` in the selection.
    pub fn toggle(&mut self, label: u32) {
        match self.selected.binary_search(&label) {
            Ok(k) => {
                self.selected.remove(k);
            }
            Err(k) => self.selected.insert(k, label),
        }
    }

    /// Adds eraser pixels.
    pub fn erase(&mut self, pixels: &Mask) -> Result<()> {
        self.erased = self.erased.union(pixels)?;
        Ok(())
    }

    /// Checks the annotation against the map it claims to index.
    pub fn check(&self, map: &SuperpixelMap) -> Result<()> {
        let current = map.content_hash();
        if self.superpixel_ref != current {
            return Err(Error::StaleAnnotation {
                expected: current,
                found: self.superpixel_ref.clone(),
            });
        }
        if let Some(&label) = self.selected.iter().find(|&&l| l >= map.n_labels()) {
            return Err(Error::LabelOutOfRange {
                label,
                n_labels: map.n_labels(),
            });
        }
        if (self.erased.width(), self.erased.height()) != (map.width(), map.height()) {
            return Err(Error::DimensionMismatch(
                self.erased.width(),
                self.erased.height(),
                map.width(),
                map.height(),
            ));
        }
        Ok(())
    }

    /// Pretty JSON with fixed key order and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation serializes");
        s.push('\n');
        s
    }

    /// Parses and validates; labels are checked against `map` when given.
    /// Errors name the offending field.
    pub fn from_json(text: &str, map: Option<&SuperpixelMap>) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::schema("", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::schema("", "expected an object"))?;
        const FIELDS: [&str; 6] = [
            "frame_id",
            "superpixel_ref",
            "selected",
            "erased",
            "author",
            "timestamp",
        ];
        if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(Error::schema(k.as_str(), "unknown field"));
        }
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| Error::schema(name, "missing field"))
        };
        let string = |name: &str| -> Result<String> {
            field(name)?
                .as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::schema(name, "expected a string"))
        };
        let frame_id = string("frame_id")?;
        let superpixel_ref = string("superpixel_ref")?;
        let selected: Vec<u32> = serde_json::from_value(field("selected")?.clone())
            .map_err(|_| Error::schema("selected", "expected an array of non-negative integers"))?;
        if selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::schema("selected", "labels must be strictly increasing"));
        }
        let erased: Mask = serde_json::from_value(field("erased")?.clone())
            .map_err(|e| Error::schema("erased", e.to_string()))?;
        let ann = Annotation {
            frame_id,
            superpixel_ref,
            selected,
            erased,
            author: string("author")?,
            timestamp: string("timestamp")?,
        };
        if let Some(map) = map {
            if let Some(&l) = ann.selected.iter().find(|&&l| l >= map.n_labels()) {
                return Err(Error::schema(
                    "selected",
                    format!("label {l} out of range, map has {} labels", map.n_labels()),
                ));
            }
            if (ann.erased.width(), ann.erased.height()) != (map.width(), map.height()) {
                return Err(Error::schema("erased", "dimensions differ from the frame"));
            }
        }
        Ok(ann)
    }
}

/// Union of the selected superpixels minus the erased pixels.
pub fn compose_mask(map: &SuperpixelMap, ann: &Annotation) -> Result<Mask> {
    ann.check(map)?;
    map.select(ann.selected.iter().copied())?
        .difference(&ann.erased)
}

/// `|a ∩ b| / |a ∪ b|`, and 1 when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    let inter = a.intersection(b)?.count();
    let union = a.count() + b.count() - inter;
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

pub fn save_annotation(path: impl AsRef<Path>, ann: &Annotation) -> Result<()> {
    fs::write(path, ann.to_json())?;
    Ok(())
}

pub fn load_annotation(path: impl AsRef<Path>, map: Option<&SuperpixelMap>) -> Result<Annotation> {
    Annotation::from_json(&fs::read_to_string(path)?, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> SuperpixelMap {
        SuperpixelMap::new(4, 4, (0..16).map(|p| ((p % 4) / 2 + 2 * (p / 8)) as u32).collect())
            .unwrap()
    }

    #[test]
    fn compose_examples() {
        let map = map();
        let mut ann = Annotation::new("f", &map);
        ann.erased = Mask::full(4, 4);
        assert!(compose_mask(&map, &ann).unwrap().is_empty());
        ann.erased = Mask::empty(4, 4);
        ann.selected = vec![0, 1, 2, 3];
        assert_eq!(compose_mask(&map, &ann).unwrap(), Mask::full(4, 4));
        ann.selected = vec![4];
        assert!(matches!(
            compose_mask(&map, &ann),
            Err(Error::LabelOutOfRange { label: 4, .. })
        ));
        ann.selected = vec![0];
        ann.superpixel_ref = "0".repeat(64);
        assert!(matches!(compose_mask(&map, &ann), Err(Error::StaleAnnotation { .. })));
    }

    #[test]
    fn iou_examples() {
        let e = Mask::empty(10, 10);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        let a = Mask::from_bits(10, 10, &(0..100).map(|p| p < 50).collect::<Vec<_>>()).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a.complement()).unwrap(), 0.0);
        assert_eq!(iou(&a, &Mask::full(10, 10)).unwrap(), 0.5);
    }

    #[test]
    fn toggle_round_trip() {
        let mut ann = Annotation::new("f", &map());
        ann.toggle(2);
        ann.toggle(0);
        assert_eq!(ann.selected, vec![0, 2]);
        ann.toggle(2);
        ann.toggle(2);
        assert_eq!(ann.selected, vec![0, 2]);
    }

    #[test]
    fn load_rejects_out_of_range_selection() {
        let map = map();
        let mut ann = Annotation::new("f", &map);
        ann.selected = vec![1, 9];
        let err = Annotation::from_json(&ann.to_json(), Some(&map)).unwrap_err();
        assert!(matches!(err, Error::Schema { ref path, .. } if path == "selected"), "{err}");
        let err = Annotation::from_json("{\"frame_id\": 3}", None).unwrap_err();
        assert!(matches!(err, Error::Schema { ref path, .. } if path == "frame_id"), "{err}");
    }
}
