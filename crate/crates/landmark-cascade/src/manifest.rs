//! Dataset manifests: a JSON list of images, face boxes and annotation files.
//!
//! ```json
//! {
//!   "landmarks": 5,
//!   "normalizer": { "interocular": [0, 1] },
//!   "samples": [
//!     { "id": "synth_00000", "image": "images/synth_00000.png",
//!       "pts": "pts/synth_00000.pts", "bbox": [12.5, 20.0, 60.0, 64.0],
//!       "pose": { "pitch": 1.0, "yaw": -3.5, "roll": 12.0 } }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use landmark_cascade_core::{BBox, EulerAngles, Normalizer, Sample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::read_gray;
use crate::pts::read_pts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub landmarks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<Normalizer>,
    pub samples: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pts: Option<PathBuf>,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<EulerAngles>,
}

impl Entry {
    pub fn bbox(&self) -> Result<BBox> {
        let [x, y, w, h] = self.bbox;
        BBox::new(x, y, w, h).map_err(|e| Error::Data(format!("sample {}: {e}", self.id)))
    }
}

/// Ids name prediction files, so they must be usable as file stems.
fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0']);
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!("sample id {id:?} is not a valid file name")))
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.landmarks == 0 {
            return Err(Error::Data("landmarks must be positive".into()));
        }
        if let Some(n) = &self.normalizer {
            n.validate(self.landmarks)?;
        }
        let mut seen = HashSet::new();
        for e in &self.samples {
            check_id(&e.id)?;
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Data(format!("duplicate sample id {}", e.id)));
            }
            e.bbox()?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| Error::Data(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Manifest::parse(&text).map_err(|e| e.at(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        std::fs::write(path, text).map_err(Error::io(path))
    }

    /// Decode every image and annotation. `base` is the manifest directory.
    pub fn load_samples(&self, base: &Path) -> Result<Vec<Sample>> {
        self.samples
            .par_iter()
            .map(|e| {
                let image = read_gray(&base.join(&e.image))?;
                let truth = match &e.pts {
                    Some(p) => {
                        let path = base.join(p);
                        let s = read_pts(&path)?;
                        if s.len() != self.landmarks {
                            return Err(Error::Data(format!(
                                "{}: {} landmarks, manifest declares {}",
                                path.display(),
                                s.len(),
                                self.landmarks
                            )));
                        }
                        Some(s)
                    }
                    None => None,
                };
                Ok(Sample { id: e.id.clone(), image, bbox: e.bbox()?, truth, pose: e.pose })
            })
            .collect()
    }

    /// Default normaliser: the manifest's own, else outer eye corners for 68
    /// points, the eye centres for 5 points, face size otherwise.
    pub fn normalizer(&self) -> Normalizer {
        self.normalizer.unwrap_or(match self.landmarks {
            68 => Normalizer::Interocular(36, 45),
            5 => Normalizer::Interocular(0, 1),
            _ => Normalizer::FaceSize,
        })
    }
}

/// Directory that relative manifest paths resolve against.
pub fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Load a manifest and all its samples.
pub fn load_dataset(path: &Path) -> Result<(Manifest, Vec<Sample>)> {
    let m = Manifest::load(path)?;
    let samples = m.load_samples(&base_dir(path))?;
    Ok((m, samples))
}
