//! Dataset-level operations behind the subcommands: pose estimation,
//! augmentation plans, batch prediction and evaluation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use landmark_cascade_core::balance::{nca_plan, pose_densities, uniform_plan};
use landmark_cascade_core::headpose::{posit, significant_angle};
use landmark_cascade_core::metrics::{ced_grid, EvalReport};
use landmark_cascade_core::rng::{rng_for, stream};
use landmark_cascade_core::{
    AugmentationPlan, CameraIntrinsics, CascadeModel, EulerAngles, GaussianFit, Model3D, Normalizer, Point2,
    PoseEstimate, Sample, Shape,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::pts::read_pts;
use crate::report::PlanRow;

pub const POSIT_TOLERANCE: f64 = 1e-8;
pub const POSIT_MAX_ITER: usize = 100;

/// Camera overrides; missing values default per image (focal 1.5 × width,
/// principal point at the centre).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub focal: Option<f64>,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

impl CameraSpec {
    pub fn for_image(&self, width: u32, height: u32) -> Result<CameraIntrinsics> {
        let d = CameraIntrinsics::for_image(width, height);
        Ok(CameraIntrinsics::new(
            self.focal.unwrap_or(d.focal),
            Point2::new(self.cx.unwrap_or(d.principal.x), self.cy.unwrap_or(d.principal.y)),
        )?)
    }
}

/// POSIT on `shape` (image pixels) of a sample.
pub fn estimate_pose(shape: &Shape, sample: &Sample, model: &Model3D, cam: &CameraSpec) -> Result<PoseEstimate> {
    let intr = cam.for_image(sample.image.width(), sample.image.height())?;
    posit(shape, model, &intr, POSIT_TOLERANCE, POSIT_MAX_ITER)
        .map_err(|e| Error::from(e).at(Path::new(&sample.id)))
}

/// Head poses of annotated samples, estimated from their ground truth.
pub fn training_poses(samples: &[Sample], model: &Model3D, cam: &CameraSpec) -> Result<Vec<EulerAngles>> {
    samples.par_iter().map(|s| Ok(estimate_pose(s.truth()?, s, model, cam)?.angles)).collect()
}

/// Total initialisation budget: a multiple of the sample count (`20N`) or an absolute number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    PerSample(u64),
    Total(u64),
}

impl Budget {
    pub fn resolve(self, n: usize) -> u64 {
        match self {
            Budget::PerSample(m) => m * n as u64,
            Budget::Total(t) => t,
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("budget {s:?} is neither an integer nor of the form 20N"));
        match s.trim().strip_suffix(['N', 'n']) {
            Some(m) => m.trim().parse().map(Budget::PerSample).map_err(|_| bad()),
            None => s.trim().parse().map(Budget::Total).map_err(|_| bad()),
        }
    }
}

/// How many initialisations each training sample receives.
#[derive(Debug, Clone, PartialEq)]
pub enum AugSpec {
    /// `uniform:M`
    Uniform(u32),
    /// `nca:MIN,MAX,BUDGET`
    Nca { m_min: u32, m_max: u32, budget: Budget },
    /// `plan:FILE`, a CSV written by `augplan`.
    Plan(PathBuf),
}

impl FromStr for AugSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("augmentation {s:?}: expected uniform:M, nca:MIN,MAX,BUDGET or plan:FILE"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "uniform" => rest.trim().parse().map(AugSpec::Uniform).map_err(|_| bad()),
            "nca" => {
                let parts: Vec<&str> = rest.split(',').collect();
                let [lo, hi, budget] = parts[..] else { return Err(bad()) };
                Ok(AugSpec::Nca {
                    m_min: lo.trim().parse().map_err(|_| bad())?,
                    m_max: hi.trim().parse().map_err(|_| bad())?,
                    budget: budget.parse()?,
                })
            }
            "plan" => Ok(AugSpec::Plan(PathBuf::from(rest))),
            _ => Err(bad()),
        }
    }
}

/// A pose-driven augmentation plan with the quantities it was built from.
#[derive(Debug, Clone)]
pub struct PosePlan {
    pub fit: GaussianFit,
    pub angles: Vec<f64>,
    pub pdf: Vec<f64>,
    pub plan: AugmentationPlan,
}

impl PosePlan {
    pub fn rows(&self, samples: &[Sample]) -> Vec<PlanRow> {
        samples
            .iter()
            .zip(&self.angles)
            .zip(&self.pdf)
            .zip(self.plan.counts())
            .map(|(((s, &a), &p), &c)| PlanRow { id: s.id.clone(), significant_angle: a, pdf: p, count: c })
            .collect()
    }
}

/// Estimate poses, fit the significant-angle Gaussian and apportion `budget`.
pub fn nca_pose_plan(
    samples: &[Sample],
    model: &Model3D,
    cam: &CameraSpec,
    bounds: (u32, u32),
    budget: u64,
) -> Result<PosePlan> {
    let poses = training_poses(samples, model, cam)?;
    let (fit, pdf) = pose_densities(&poses)?;
    let plan = nca_plan(&pdf, budget, bounds.0, bounds.1)?;
    Ok(PosePlan { fit, angles: poses.iter().map(significant_angle).collect(), pdf, plan })
}

/// Plan for `samples` according to `spec`.
pub fn build_plan(spec: &AugSpec, samples: &[Sample], model: Option<&Model3D>, cam: &CameraSpec) -> Result<AugmentationPlan> {
    match spec {
        AugSpec::Uniform(m) => Ok(uniform_plan(samples.len(), *m)?),
        AugSpec::Nca { m_min, m_max, budget } => {
            let model = model.ok_or_else(|| Error::Config("nca augmentation needs a 3D model".into()))?;
            Ok(nca_pose_plan(samples, model, cam, (*m_min, *m_max), budget.resolve(samples.len()))?.plan)
        }
        AugSpec::Plan(path) => {
            let rows = crate::report::read_plan(path)?;
            if rows.len() != samples.len() || rows.iter().zip(samples).any(|(r, s)| r.id != s.id) {
                return Err(Error::Config(format!("{}: plan rows do not match the manifest samples", path.display())));
            }
            let counts: Vec<u32> = rows.iter().map(|r| r.count).collect();
            let lo = counts.iter().copied().min().unwrap_or(0);
            let hi = counts.iter().copied().max().unwrap_or(0);
            Ok(AugmentationPlan::new(counts, (lo, hi))?)
        }
    }
}

/// Batch predictions with the fingerprint of the initialisations used.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub shapes: Vec<Shape>,
    /// SHA-256 of all initial shapes (unit frame, little-endian `f64`), hex.
    pub init_hash: String,
}

/// Predict every sample. Sample `i` draws its restarts from the `PREDICT`
/// stream of `seed`, so two models with the same landmark count and
/// initialisation settings start from identical shapes.
pub fn predict_samples(model: &CascadeModel, samples: &[Sample], restarts: usize, seed: u64) -> Result<Predictions> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let runs: Vec<(Vec<Shape>, Shape)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = rng_for(seed, stream::PREDICT, i as u64);
            let inits = model.initial_shapes(restarts, &mut rng);
            let shape = model.predict_from_inits(&s.image, &s.bbox, &inits)?;
            Ok((inits, shape))
        })
        .collect::<Result<_>>()?;
    let mut hasher = Sha256::new();
    for (inits, _) in &runs {
        for s in inits {
            for v in s.to_flat() {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let init_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(Predictions { shapes: runs.into_iter().map(|(_, s)| s).collect(), init_hash })
}

/// Outcome for one manifest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEval {
    pub id: String,
    pub nme: Option<f64>,
    pub pose: Option<EulerAngles>,
    /// Empty on success, else why the sample could not be scored.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub samples: Vec<SampleEval>,
    pub normalizer: Normalizer,
    /// Metrics over all samples; unscored samples count as failures.
    pub report: EvalReport,
    /// Mean NME over the scored samples only.
    pub mean_nme_scored: f64,
}

pub const CED_MAX: f64 = 0.5;
pub const CED_STEPS: usize = 100;
/// Default failure-histogram edges, degrees.
pub fn default_edges() -> Vec<f64> {
    (-6..=6).map(|i| 10.0 * i as f64).collect()
}

/// Score the predictions in `pred_dir` (`<id>.pts`) against the manifest annotations.
/// A missing or unreadable prediction is listed with an error and counted as a failure.
pub fn evaluate_dir(
    manifest: &Manifest,
    base: &Path,
    pred_dir: &Path,
    normalizer: Normalizer,
    threshold: f64,
) -> Result<Evaluation> {
    normalizer.validate(manifest.landmarks)?;
    let samples: Vec<SampleEval> = manifest
        .samples
        .par_iter()
        .map(|e| {
            let truth_path = e.pts.as_ref().ok_or_else(|| Error::Data(format!("sample {} has no annotation", e.id)))?;
            let truth = read_pts(&base.join(truth_path))?;
            let bbox = e.bbox()?;
            let scored = read_pts(&pred_dir.join(format!("{}.pts", e.id))).and_then(|pred| {
                if pred.len() != truth.len() {
                    return Err(Error::Data(format!("{} predicted landmarks, {} annotated", pred.len(), truth.len())));
                }
                Ok(landmark_cascade_core::metrics::nme(&pred, &truth, &bbox, normalizer)?)
            });
            let (nme, error) = match scored {
                Ok(v) => (Some(v), String::new()),
                Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
                    (None, "missing prediction".to_string())
                }
                Err(err) => (None, err.to_string()),
            };
            Ok(SampleEval { id: e.id.clone(), nme, pose: e.pose, error })
        })
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(Error::Data("manifest has no samples".into()));
    }
    let errors: Vec<f64> = samples.iter().map(|s| s.nme.unwrap_or(f64::INFINITY)).collect();
    let angles: Option<Vec<f64>> = samples.iter().map(|s| s.pose.as_ref().map(significant_angle)).collect();
    let edges = default_edges();
    let report =
        EvalReport::new(errors, threshold, ced_grid(CED_MAX, CED_STEPS), angles.as_deref().map(|a| (a, &edges[..])))?;
    let scored: Vec<f64> = samples.iter().filter_map(|s| s.nme).collect();
    let mean_nme_scored =
        if scored.is_empty() { f64::NAN } else { scored.iter().sum::<f64>() / scored.len() as f64 };
    Ok(Evaluation { samples, normalizer, report, mean_nme_scored })
}
