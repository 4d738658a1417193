//! File-backed frames, superpixel maps, annotations and parameter sets.
//!
//! ```text
//! {root}/frames/{frame_id}.png
//! {root}/superpixels/{frame_id}.json
//! {root}/annotations/{frame_id}.json
//! {root}/params/{name}.json
//! {root}/jobs/{job_id}/job.json
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use phasefield::annot::Annotation;
use phasefield::energy::ModelParams;
use phasefield::raster::GrayImage;
use phasefield::slic::SuperpixelMap;
use phasefield::workflow::read_params;

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameInfo {
    pub frame_id: String,
    pub width: usize,
    pub height: usize,
}

pub struct Store {
    root: PathBuf,
    write_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn check_id(id: &str, what: &str) -> ApiResult<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(ApiError::not_found(format!("unknown {what} `{id}`")))
    }
}

fn read_optional(path: &Path) -> ApiResult<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(bytes)),
        Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        for dir in ["frames", "superpixels", "annotations", "params", "jobs"] {
            fs::create_dir_all(root.join(dir))?;
        }
        Ok(Self {
            root,
            write_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn frame_path(&self, id: &str) -> PathBuf {
        self.root.join("frames").join(format!("{id}.png"))
    }

    pub fn list_frames(&self) -> ApiResult<Vec<FrameInfo>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("frames"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".png").map(str::to_owned)
            })
            .filter(|id| check_id(id, "frame").is_ok())
            .collect();
        ids.sort();
        ids.into_iter()
            .map(|id| {
                let img = self.frame_image(&id)?;
                Ok(FrameInfo {
                    frame_id: id,
                    width: img.width(),
                    height: img.height(),
                })
            })
            .collect()
    }

    pub fn frame_png(&self, id: &str) -> ApiResult<Vec<u8>> {
        check_id(id, "frame")?;
        read_optional(&self.frame_path(id))?
            .ok_or_else(|| ApiError::not_found(format!("unknown frame `{id}`")))
    }

    pub fn frame_image(&self, id: &str) -> ApiResult<GrayImage> {
        Ok(GrayImage::decode_png(&self.frame_png(id)?)?)
    }

    fn superpixel_path(&self, id: &str) -> PathBuf {
        self.root.join("superpixels").join(format!("{id}.json"))
    }

    pub fn superpixels(&self, id: &str) -> ApiResult<Option<SuperpixelMap>> {
        check_id(id, "frame")?;
        match read_optional(&self.superpixel_path(id))? {
            None => Ok(None),
            Some(bytes) => Ok(Some(SuperpixelMap::from_json(
                std::str::from_utf8(&bytes).map_err(|e| ApiError::internal(e.to_string()))?,
            )?)),
        }
    }

    pub fn save_superpixels(&self, id: &str, map: &SuperpixelMap) -> ApiResult<()> {
        check_id(id, "frame")?;
        let lock = self.write_lock(id);
        let _guard = lock.lock().expect("lock poisoned");
        fs::write(self.superpixel_path(id), map.to_json())?;
        Ok(())
    }

    fn annotation_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.json"))
    }

    /// Canonical annotation file bytes.
    pub fn annotation_json(&self, id: &str) -> ApiResult<Option<String>> {
        check_id(id, "frame")?;
        read_optional(&self.annotation_path(id))?
            .map(|b| String::from_utf8(b).map_err(|e| ApiError::internal(e.to_string())))
            .transpose()
    }

    pub fn annotation(&self, id: &str) -> ApiResult<Option<Annotation>> {
        match self.annotation_json(id)? {
            None => Ok(None),
            Some(text) => Ok(Some(Annotation::from_json(&text, None)?)),
        }
    }

    pub fn save_annotation(&self, ann: &Annotation) -> ApiResult<()> {
        check_id(&ann.frame_id, "frame")?;
        let lock = self.write_lock(&ann.frame_id);
        let _guard = lock.lock().expect("lock poisoned");
        fs::write(self.annotation_path(&ann.frame_id), ann.to_json())?;
        Ok(())
    }

    pub fn params(&self, name: &str) -> ApiResult<ModelParams> {
        check_id(name, "parameter set")?;
        let path = self.root.join("params").join(format!("{name}.json"));
        if !path.exists() {
            return Err(ApiError::bad_request(
                "theta",
                format!("unknown parameter set `{name}`"),
            ));
        }
        Ok(read_params(path)?)
    }

    pub fn params_path(&self, name: &str) -> PathBuf {
        self.root.join("params").join(format!("{name}.json"))
    }

    /// Writes to one frame's files are serialized; reads never wait.
    fn write_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.write_locks
            .lock()
            .expect("lock poisoned")
            .entry(id.to_owned())
            .or_default()
            .clone()
    }
}
