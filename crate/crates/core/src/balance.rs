//! Pose-aware augmentation planning and Monte Carlo initial shapes.
//!
//! Samples whose significant head-pose angle lies where the fitted Gaussian is
//! dense receive fewer initialisations, rare poses receive more, and the total
//! stays at a fixed budget.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{mean_shape, BBox, Point2, Shape};
use crate::headpose::{significant_angle, EulerAngles};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        math::exp(-0.5 * z * z) / (self.sigma * math::sqrt(2.0 * PI))
    }
}

/// Sample mean and unbiased standard deviation.
pub fn fit_gaussian(angles: &[f64]) -> Result<GaussianFit> {
    if angles.len() < 2 {
        return Err(Error::InvalidConfig("a Gaussian fit needs at least two angles".into()));
    }
    if !angles.iter().all(|a| a.is_finite()) {
        return Err(Error::NonFinite("pose angles"));
    }
    let n = angles.len() as f64;
    let mu = angles.iter().sum::<f64>() / n;
    let var = angles.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::InvalidConfig("pose angles have zero variance".into()));
    }
    Ok(GaussianFit { mu, sigma: math::sqrt(var) })
}

/// Fit the Gaussian over significant angles and evaluate its density at every sample.
pub fn pose_densities(poses: &[EulerAngles]) -> Result<(GaussianFit, Vec<f64>)> {
    let angles: Vec<f64> = poses.iter().map(significant_angle).collect();
    let fit = fit_gaussian(&angles)?;
    let pdf = angles.iter().map(|&a| fit.pdf(a)).collect();
    Ok((fit, pdf))
}

/// Initialisation count per training sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationPlan {
    counts: Vec<u32>,
    budget: u64,
    bounds: (u32, u32),
}

impl AugmentationPlan {
    pub fn new(counts: Vec<u32>, bounds: (u32, u32)) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("augmentation plan"));
        }
        if bounds.0 > bounds.1 || counts.iter().any(|&c| c < bounds.0 || c > bounds.1) {
            return Err(Error::InvalidConfig("augmentation counts outside bounds".into()));
        }
        let budget = counts.iter().map(|&c| c as u64).sum();
        Ok(AugmentationPlan { counts, budget, bounds })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn bounds(&self) -> (u32, u32) {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Every sample gets `m` initialisations.
pub fn uniform_plan(n: usize, m: u32) -> Result<AugmentationPlan> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("uniform plan needs n > 0 and m > 0".into()));
    }
    AugmentationPlan::new(alloc::vec![m; n], (m, m))
}

/// Negatively correlated augmentation counts.
///
/// The line `m = a·pdf + b` is pinned by the density extremes (densest sample
/// → `m_min`, sparsest → `m_max`). The intercept is then shifted until the
/// clamped real-valued counts sum to `budget`, and the counts are integerised
/// by largest remainder. Counts stay within bounds, never increase with
/// density and sum to the budget exactly.
pub fn nca_plan(pdf_values: &[f64], budget: u64, m_min: u32, m_max: u32) -> Result<AugmentationPlan> {
    let n = pdf_values.len();
    if n == 0 {
        return Err(Error::Empty("density values"));
    }
    if m_min > m_max {
        return Err(Error::InvalidConfig("m_min must not exceed m_max".into()));
    }
    if !pdf_values.iter().all(|p| p.is_finite() && *p >= 0.0) {
        return Err(Error::InvalidConfig("density values must be finite and non-negative".into()));
    }
    let (min_total, max_total) = (n as u64 * m_min as u64, n as u64 * m_max as u64);
    if budget < min_total || budget > max_total {
        return Err(Error::InfeasibleBudget { budget, min_total, max_total });
    }

    let lo_pdf = pdf_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_pdf = pdf_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi_pdf == lo_pdf {
        let base = (budget / n as u64) as u32;
        let extra = (budget % n as u64) as usize;
        let counts = (0..n).map(|i| base + u32::from(i < extra)).collect();
        return AugmentationPlan::new(counts, (m_min, m_max));
    }

    let (lo_m, hi_m) = (m_min as f64, m_max as f64);
    let raw: Vec<f64> = pdf_values
        .iter()
        .map(|&p| hi_m + (lo_m - hi_m) * ((p - lo_pdf) / (hi_pdf - lo_pdf)))
        .collect();
    let total = |shift: f64| raw.iter().map(|r| (r + shift).clamp(lo_m, hi_m)).sum::<f64>();
    let target = budget as f64;
    let (mut lo, mut hi) = (lo_m - hi_m, hi_m - lo_m);
    let mut shift = 0.0;
    if total(0.0) != target {
        for _ in 0..200 {
            shift = 0.5 * (lo + hi);
            match total(shift).partial_cmp(&target) {
                Some(Ordering::Less) => lo = shift,
                Some(Ordering::Greater) => hi = shift,
                _ => break,
            }
        }
    }

    let values: Vec<f64> = raw.iter().map(|r| (r + shift).clamp(lo_m, hi_m)).collect();
    let mut counts: Vec<u32> = values.iter().map(|&v| math::floor(v) as u32).collect();
    let rem: Vec<f64> = values.iter().zip(&counts).map(|(&v, &c)| v - c as f64).collect();
    let assigned: u64 = counts.iter().map(|&c| c as u64).sum();
    let mut deficit = budget as i64 - assigned as i64;

    let mut order: Vec<usize> = (0..n).collect();
    if deficit > 0 {
        // Largest remainder first; among equal remainders the sparser sample.
        order.sort_by(|&a, &b| {
            rem[b].total_cmp(&rem[a]).then(pdf_values[a].total_cmp(&pdf_values[b])).then(a.cmp(&b))
        });
        while deficit > 0 {
            for &i in &order {
                if deficit == 0 {
                    break;
                }
                if counts[i] < m_max {
                    counts[i] += 1;
                    deficit -= 1;
                }
            }
        }
    } else if deficit < 0 {
        order.sort_by(|&a, &b| {
            rem[a].total_cmp(&rem[b]).then(pdf_values[b].total_cmp(&pdf_values[a])).then(a.cmp(&b))
        });
        while deficit < 0 {
            for &i in &order {
                if deficit == 0 {
                    break;
                }
                if counts[i] > m_min {
                    counts[i] -= 1;
                    deficit += 1;
                }
            }
        }
    }
    AugmentationPlan::new(counts, (m_min, m_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitSource {
    MeanShape,
    /// A random donor shape, never the sample's own annotation.
    Resample,
}

/// Jitter applied to initial shapes, relative to the face box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct InitConfig {
    /// Uniform shift in `[-shift, shift]` on each axis, fraction of the box.
    pub shift: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub source: InitSource,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { shift: 0.05, scale_min: 0.9, scale_max: 1.1, source: InitSource::Resample }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.shift.is_finite()
            && self.shift >= 0.0
            && self.scale_min.is_finite()
            && self.scale_max.is_finite()
            && self.scale_min > 0.0
            && self.scale_min <= self.scale_max;
        if !ok {
            return Err(Error::InvalidConfig("jitter ranges must be finite, shift ≥ 0, 0 < scale_min ≤ scale_max".into()));
        }
        Ok(())
    }
}

/// Scale `shape` about its centroid and shift it, both drawn from `cfg`.
pub(crate) fn jitter<R: Rng + ?Sized>(shape: &Shape, cfg: &InitConfig, rng: &mut R) -> Shape {
    let scale = if cfg.scale_max > cfg.scale_min { rng.random_range(cfg.scale_min..=cfg.scale_max) } else { cfg.scale_min };
    let (dx, dy) = if cfg.shift > 0.0 {
        (rng.random_range(-cfg.shift..=cfg.shift), rng.random_range(-cfg.shift..=cfg.shift))
    } else {
        (0.0, 0.0)
    };
    let c = shape.centroid();
    let offset = Point2::new(dx, dy);
    Shape::from_vec_unchecked(shape.points().iter().map(|&p| c + (p - c) * scale + offset).collect())
}

/// Unit-frame initial shapes. `exclude` names a donor that must not be drawn
/// (the sample's own annotation) when other donors exist.
pub(crate) fn generate_inits_unit<R: Rng + ?Sized>(
    donors: &[Shape],
    mean: Option<&Shape>,
    exclude: Option<usize>,
    count: usize,
    cfg: &InitConfig,
    rng: &mut R,
) -> Result<Vec<Shape>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(count);
    match cfg.source {
        InitSource::MeanShape => {
            let owned;
            let mean = match mean {
                Some(m) => m,
                None => {
                    owned = mean_shape(donors)?;
                    &owned
                }
            };
            for _ in 0..count {
                out.push(jitter(mean, cfg, rng));
            }
        }
        InitSource::Resample => {
            if donors.is_empty() {
                return Err(Error::Empty("init donors"));
            }
            let skip = exclude.filter(|&e| e < donors.len() && donors.len() > 1);
            let pool = donors.len() - usize::from(skip.is_some());
            for _ in 0..count {
                let mut d = rng.random_range(0..pool);
                if let Some(e) = skip {
                    if d >= e {
                        d += 1;
                    }
                }
                out.push(jitter(&donors[d], cfg, rng));
            }
        }
    }
    Ok(out)
}

/// `count` Monte Carlo initial shapes, placed in `bbox` (image pixels).
pub fn generate_inits<R: Rng + ?Sized>(
    bbox: &BBox,
    donors: &[Shape],
    count: usize,
    cfg: &InitConfig,
    rng: &mut R,
) -> Result<Vec<Shape>> {
    if count == 0 {
        return Err(Error::InvalidConfig("at least one initialisation is required".into()));
    }
    bbox.validate()?;
    generate_inits_unit(donors, None, None, count, cfg, rng)?
        .iter()
        .map(|s| crate::geometry::denormalize_shape(s, bbox))
        .collect()
}
