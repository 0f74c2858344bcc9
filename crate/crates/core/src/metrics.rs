//! Landmark error metrics: NME, success rate, CED and pose-binned failures.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Shape};

/// Success threshold on NME.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// What an error is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Normalizer {
    /// Distance between two ground-truth landmarks.
    Interocular(usize, usize),
    /// `√(w·h)` of the face box.
    FaceSize,
}

impl Normalizer {
    pub fn validate(&self, k: usize) -> Result<()> {
        if let Normalizer::Interocular(l, r) = *self {
            for index in [l, r] {
                if index >= k {
                    return Err(Error::IndexOutOfRange { index, len: k });
                }
            }
            if l == r {
                return Err(Error::InvalidConfig("interocular indices must differ".into()));
            }
        }
        Ok(())
    }

    /// Normalising length for one sample.
    pub fn length(&self, truth: &Shape, bbox: &BBox) -> Result<f64> {
        self.validate(truth.len())?;
        let d = match *self {
            Normalizer::Interocular(l, r) => truth.points()[l].distance(truth.points()[r]),
            Normalizer::FaceSize => bbox.size(),
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::ZeroNormalizer);
        }
        Ok(d)
    }
}

/// Mean landmark distance between `pred` and `truth` over the normaliser length.
pub fn nme(pred: &Shape, truth: &Shape, bbox: &BBox, norm: Normalizer) -> Result<f64> {
    pred.check_len(truth.len())?;
    let d = norm.length(truth, bbox)?;
    let sum: f64 = pred.points().iter().zip(truth.points()).map(|(p, t)| p.distance(*t)).sum();
    Ok(sum / truth.len() as f64 / d)
}

/// Fraction of errors strictly below `threshold`.
pub fn slr(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("errors"));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig("threshold must be positive".into()));
    }
    Ok(fraction_below(errors, threshold))
}

fn fraction_below(errors: &[f64], threshold: f64) -> f64 {
    errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64
}

/// Cumulative fraction of errors strictly below each grid threshold.
/// NaN errors never count as successes.
pub fn ced(errors: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("CED grid must be strictly increasing".into()));
    }
    if errors.is_empty() {
        return Ok(vec![0.0; grid.len()]);
    }
    Ok(grid.iter().map(|&t| if t == f64::INFINITY { 1.0 } else { fraction_below(errors, t) }).collect())
}

/// `count` evenly spaced thresholds in `(0, max]`.
pub fn ced_grid(max: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| max * i as f64 / count as f64).collect()
}

/// Count samples with error above `threshold` in each `[edges[i], edges[i+1])`.
/// Angles outside the edges are counted in the nearest end bin.
pub fn failure_histogram(errors: &[f64], angles: &[f64], edges: &[f64], threshold: f64) -> Result<Vec<u32>> {
    if errors.len() != angles.len() {
        return Err(Error::LengthMismatch { what: "errors and angles", left: errors.len(), right: angles.len() });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("histogram edges must be strictly increasing, at least two".into()));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0u32; bins];
    for (&e, &a) in errors.iter().zip(angles) {
        if !(e > threshold) && !e.is_nan() {
            continue;
        }
        let bin = edges[1..bins].partition_point(|&edge| edge <= a);
        counts[bin] += 1;
    }
    Ok(counts)
}

/// Ascending copy of `errors` (NaN last).
pub fn sorted_errors(errors: &[f64]) -> Vec<f64> {
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Summary of one evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub errors: Vec<f64>,
    pub mean_nme: f64,
    pub threshold: f64,
    pub slr: f64,
    pub ced_grid: Vec<f64>,
    pub ced: Vec<f64>,
    pub failures: Option<Vec<u32>>,
}

impl EvalReport {
    /// Build a report; `poses` and `edges` add the failure histogram.
    pub fn new(errors: Vec<f64>, threshold: f64, grid: Vec<f64>, poses: Option<(&[f64], &[f64])>) -> Result<Self> {
        let slr = slr(&errors, threshold)?;
        let ced = ced(&errors, &grid)?;
        let failures = poses.map(|(angles, edges)| failure_histogram(&errors, angles, edges, threshold)).transpose()?;
        let mean_nme = errors.iter().sum::<f64>() / errors.len() as f64;
        Ok(EvalReport { errors, mean_nme, threshold, slr, ced_grid: grid, ced, failures })
    }
}
