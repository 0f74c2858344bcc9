//! CSV and JSON outputs: evaluation reports, CED curves, augmentation plans
//! and pose tables.

use std::path::Path;

use landmark_cascade_core::cascade::TrainLog;
use landmark_cascade_core::EulerAngles;
use serde::Serialize;

use crate::error::{Error, Result};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

/// Write serialisable rows with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    for row in rows {
        w.serialize(row).map_err(&err)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

#[derive(Debug, Serialize)]
pub struct ReportRow<'a> {
    pub id: &'a str,
    pub nme: Option<f64>,
    pub pitch: Option<f64>,
    pub yaw: Option<f64>,
    pub roll: Option<f64>,
    pub success: bool,
    pub error: &'a str,
}

impl<'a> ReportRow<'a> {
    pub fn new(id: &'a str, nme: Option<f64>, pose: Option<EulerAngles>, threshold: f64, error: &'a str) -> Self {
        ReportRow {
            id,
            nme,
            pitch: pose.map(|p| p.pitch),
            yaw: pose.map(|p| p.yaw),
            roll: pose.map(|p| p.roll),
            success: nme.is_some_and(|e| e < threshold),
            error,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CedRow {
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct SortedRow {
    pub rank: usize,
    pub nme: f64,
}

#[derive(Debug, Serialize)]
pub struct HistogramRow {
    pub angle_min: f64,
    pub angle_max: f64,
    pub failures: u32,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct PlanRow {
    pub id: String,
    pub significant_angle: f64,
    pub pdf: f64,
    pub count: u32,
}

#[derive(Debug, Serialize)]
pub struct PoseRow<'a> {
    pub id: &'a str,
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub significant_angle: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
struct LogRow {
    stage: usize,
    mean_nme: f64,
    rms: f64,
}

pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    write_csv(path, log.stages.iter().map(|s| LogRow { stage: s.stage, mean_nme: s.mean_nme, rms: s.rms }))
}

/// Per-sample counts from a plan CSV, in file order.
pub fn read_plan(path: &Path) -> Result<Vec<PlanRow>> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    r.deserialize().map(|row| row.map_err(&err)).collect()
}
