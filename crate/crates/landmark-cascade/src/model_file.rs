//! `.cascade.json` model files.
//!
//! A versioned JSON envelope. Fern bin updates are stored as base64 of
//! little-endian `f64`; every other float is written in shortest round-trip
//! form, so loading reproduces the trained model bit for bit.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use landmark_cascade_core::features::{Anchors, LocalOffsetIndex, PairIndex, TifIndex};
use landmark_cascade_core::{CascadeModel, FeatureMode, FeaturePool, Fern, Point2, Shape, Stage, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &str = "landmark-cascade-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    magic: Option<String>,
    format_version: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    magic: String,
    format_version: u32,
    k: usize,
    mode: FeatureMode,
    /// Unit-frame mean shape, `x0, y0, x1, y1, ...`.
    mean: Vec<f64>,
    train_config: TrainConfig,
    stages: Vec<StageFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    anchors: AnchorsFile,
    pairs: Vec<(u32, u32)>,
    ferns: Vec<FernFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AnchorsFile {
    /// `[i, j, k, alpha, beta]`
    Tif(Vec<(usize, usize, usize, f64, f64)>),
    /// `[i, j, gamma]`
    Pair(Vec<(usize, usize, f64)>),
    /// `[k, dx, dy]`
    Offset(Vec<(usize, f64, f64)>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FernFile {
    slots: Vec<u32>,
    thresholds: Vec<i32>,
    updates: String,
}

fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f64(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(text).map_err(|e| Error::Data(format!("fern updates: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Data("fern updates are not a whole number of f64 values".into()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl From<&Anchors> for AnchorsFile {
    fn from(a: &Anchors) -> Self {
        match a {
            Anchors::Tif(v) => AnchorsFile::Tif(v.iter().map(|t| (t.i, t.j, t.k, t.alpha, t.beta)).collect()),
            Anchors::Pair(v) => AnchorsFile::Pair(v.iter().map(|p| (p.i, p.j, p.gamma)).collect()),
            Anchors::Offset(v) => AnchorsFile::Offset(v.iter().map(|o| (o.k, o.offset.x, o.offset.y)).collect()),
        }
    }
}

impl From<AnchorsFile> for Anchors {
    fn from(a: AnchorsFile) -> Self {
        match a {
            AnchorsFile::Tif(v) => {
                Anchors::Tif(v.into_iter().map(|(i, j, k, alpha, beta)| TifIndex { i, j, k, alpha, beta }).collect())
            }
            AnchorsFile::Pair(v) => Anchors::Pair(v.into_iter().map(|(i, j, gamma)| PairIndex { i, j, gamma }).collect()),
            AnchorsFile::Offset(v) => Anchors::Offset(
                v.into_iter().map(|(k, x, y)| LocalOffsetIndex { k, offset: Point2::new(x, y) }).collect(),
            ),
        }
    }
}

pub fn model_to_string(model: &CascadeModel) -> String {
    let file = ModelFile {
        magic: MAGIC.into(),
        format_version: FORMAT_VERSION,
        k: model.landmark_count(),
        mode: model.mode(),
        mean: model.mean().to_flat(),
        train_config: *model.config(),
        stages: model
            .stages()
            .iter()
            .map(|s| StageFile {
                anchors: s.pool.anchors().into(),
                pairs: s.pool.pairs().to_vec(),
                ferns: s
                    .ferns
                    .iter()
                    .map(|f| FernFile {
                        slots: f.slots().to_vec(),
                        thresholds: f.thresholds().to_vec(),
                        updates: encode_f64(f.updates()),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&file).expect("model serialises");
    text.push('\n');
    text
}

pub fn model_from_str(text: &str) -> Result<CascadeModel> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Data(format!("model file: {e}")))?;
    if header.magic.as_deref() != Some(MAGIC) {
        return Err(Error::Data("not a landmark-cascade model file (bad magic)".into()));
    }
    match header.format_version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::Data(format!("unsupported model format version {v} (expected {FORMAT_VERSION})"))),
        None => return Err(Error::Data("model file has no format_version".into())),
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("model file: {e}")))?;
    let mean = Shape::from_flat(&file.mean)?;
    if mean.len() != file.k {
        return Err(Error::Data(format!("model declares k = {} but the mean shape has {}", file.k, mean.len())));
    }
    if file.mode != file.train_config.mode {
        return Err(Error::Data("model mode disagrees with its training config".into()));
    }
    let dim = 2 * file.k;
    let stages = file
        .stages
        .into_iter()
        .map(|s| {
            let pool = FeaturePool::new(s.anchors.into(), s.pairs)?;
            let ferns = s
                .ferns
                .into_iter()
                .map(|f| Ok(Fern::new(f.slots, f.thresholds, decode_f64(&f.updates)?, dim)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(Stage { pool, ferns })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CascadeModel::new(mean, stages, file.train_config)?)
}

pub fn save_model(path: &Path, model: &CascadeModel) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(Error::io(path))
}

pub fn load_model(path: &Path) -> Result<CascadeModel> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    model_from_str(&text).map_err(|e| e.at(path))
}
