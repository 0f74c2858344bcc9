//! 3D landmark models for head-pose estimation, as JSON:
//! `{"name": "face5", "points": [[x, y, z], ...]}`.
//!
//! The built-in layouts (`face5`, `face68`, `sheep8`) are also shipped as
//! files under `data/` to serve as templates for custom models.

use std::path::Path;

use landmark_cascade_core::Model3D;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Model3DFile {
    #[serde(default)]
    name: Option<String>,
    points: Vec<[f64; 3]>,
}

pub fn builtin_model3d(name: &str) -> Option<Model3D> {
    match name {
        "face5" => Some(Model3D::face5()),
        "face68" => Some(Model3D::face68()),
        "sheep8" => Some(Model3D::sheep8()),
        _ => None,
    }
}

pub fn model3d_from_str(text: &str) -> Result<Model3D> {
    let file: Model3DFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("3D model: {e}")))?;
    Ok(Model3D::new(file.points)?)
}

/// Pretty JSON with one point per line.
pub fn model3d_to_string(name: &str, model: &Model3D) -> String {
    let points: Vec<String> =
        model.points().iter().map(|p| format!("    {}", serde_json::to_string(p).expect("point serialises"))).collect();
    let name = serde_json::to_string(name).expect("name serialises");
    format!("{{\n  \"name\": {name},\n  \"points\": [\n{}\n  ]\n}}\n", points.join(",\n"))
}

/// A built-in name or a JSON file path.
pub fn load_model3d(spec: &str) -> Result<Model3D> {
    if let Some(m) = builtin_model3d(spec) {
        return Ok(m);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    model3d_from_str(&text).map_err(|e| e.at(path))
}

/// `spec` if given, else the built-in layout with `k` points.
pub fn resolve_model3d(spec: Option<&str>, k: usize) -> Result<Model3D> {
    let model = match spec {
        Some(s) => load_model3d(s)?,
        None => Model3D::builtin(k).ok_or_else(|| {
            Error::Config(format!("no built-in 3D model has {k} points; pass --model3d"))
        })?,
    };
    if model.len() != k {
        return Err(Error::Config(format!("3D model has {} points but the dataset has {k} landmarks", model.len())));
    }
    Ok(model)
}
