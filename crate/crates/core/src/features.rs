//! Shape-indexed pixel addressing and pixel-difference features.
//!
//! Three addressing schemes are supported:
//!
//! * [`TifIndex`]: triplet interpolation. A primary landmark `y_i` plus two
//!   edge vectors towards `y_j` and `y_k` span the whole plane, so the indexed
//!   point `y_i + α(y_j − y_i) + β(y_k − y_i)` can sit anywhere on (or off) the
//!   face. The coefficients `(1 − α − β, α, β)` sum to one, which makes the
//!   point equivariant under every affine map of the shape, and no reference
//!   transform has to be estimated.
//! * [`PairIndex`]: two-point interpolation. Points are restricted to the
//!   segment between two landmarks.
//! * [`LocalOffsetIndex`]: closest-landmark offsets. An offset expressed in
//!   the mean-shape frame is carried into the current shape by a fitted
//!   similarity transform.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use crate::dataset::{sample_intensity, Image};
use crate::error::{Error, Result};
use crate::geometry::{similarity_fit, Point2, Shape, SimilarityTransform};
use crate::math;

/// Lower bound of the uniform law for triplet ratios.
pub const TIF_RATIO_MIN: f64 = -0.4;
/// Upper bound of the uniform law for triplet ratios.
pub const TIF_RATIO_MAX: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FeatureMode {
    /// Triplet-interpolated features.
    Tif,
    /// Two-landmark interpolation.
    Pair,
    /// Closest-landmark offsets in the mean-shape frame.
    Offset,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Tif => "tif",
            FeatureMode::Pair => "pair",
            FeatureMode::Offset => "offset",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureMode> {
        match s {
            "tif" => Some(FeatureMode::Tif),
            "pair" => Some(FeatureMode::Pair),
            "offset" => Some(FeatureMode::Offset),
            _ => None,
        }
    }

    /// Smallest landmark count the mode can address.
    pub fn min_landmarks(self) -> usize {
        match self {
            FeatureMode::Tif => 3,
            FeatureMode::Pair | FeatureMode::Offset => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TifIndex {
    /// Primary landmark.
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl TifIndex {
    pub fn validate(&self, len: usize) -> Result<()> {
        for index in [self.i, self.j, self.k] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        if self.i == self.j || self.i == self.k || self.j == self.k {
            return Err(Error::InvalidConfig("triplet landmarks must be distinct".into()));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::NonFinite("triplet ratios"));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, pts: &[Point2]) -> Point2 {
        let yi = pts[self.i];
        yi + (pts[self.j] - yi) * self.alpha + (pts[self.k] - yi) * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairIndex {
    pub i: usize,
    pub j: usize,
    pub gamma: f64,
}

impl PairIndex {
    pub fn validate(&self, len: usize) -> Result<()> {
        for index in [self.i, self.j] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        if self.i == self.j {
            return Err(Error::InvalidConfig("pair landmarks must be distinct".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("pair ratio"));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, pts: &[Point2]) -> Point2 {
        let yi = pts[self.i];
        yi + (pts[self.j] - yi) * self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOffsetIndex {
    pub k: usize,
    /// Offset in the mean-shape (unit box) frame.
    pub offset: Point2,
}

impl LocalOffsetIndex {
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.k >= len {
            return Err(Error::IndexOutOfRange { index: self.k, len });
        }
        if !self.offset.is_finite() {
            return Err(Error::NonFinite("landmark offset"));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, pts: &[Point2], transform: &SimilarityTransform) -> Point2 {
        pts[self.k] + transform.apply_linear(self.offset)
    }
}

/// `y_i + α·(y_j − y_i) + β·(y_k − y_i)`.
pub fn tif_point(shape: &Shape, idx: &TifIndex) -> Result<Point2> {
    idx.validate(shape.len())?;
    Ok(idx.eval(shape.points()))
}

/// `y_i + γ·(y_j − y_i)`.
pub fn pair_point(shape: &Shape, idx: &PairIndex) -> Result<Point2> {
    idx.validate(shape.len())?;
    Ok(idx.eval(shape.points()))
}

/// `y_k` plus the offset rotated and scaled by the mean→shape similarity.
pub fn offset_point(shape: &Shape, mean: &Shape, idx: &LocalOffsetIndex) -> Result<Point2> {
    idx.validate(shape.len())?;
    let t = similarity_fit(mean, shape)?;
    Ok(idx.eval(shape.points(), &t))
}

/// Anchor list of a pool; every anchor yields one sampled pixel.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchors {
    Tif(Vec<TifIndex>),
    Pair(Vec<PairIndex>),
    Offset(Vec<LocalOffsetIndex>),
}

impl Anchors {
    pub fn len(&self) -> usize {
        match self {
            Anchors::Tif(v) => v.len(),
            Anchors::Pair(v) => v.len(),
            Anchors::Offset(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> FeatureMode {
        match self {
            Anchors::Tif(_) => FeatureMode::Tif,
            Anchors::Pair(_) => FeatureMode::Pair,
            Anchors::Offset(_) => FeatureMode::Offset,
        }
    }
}

/// Sampling parameters for a stage's feature pool.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoolConfig {
    pub mode: FeatureMode,
    /// Number of indexed pixels `P`.
    pub anchors: usize,
    /// Number of pixel-difference features drawn from the anchors.
    pub pairs: usize,
    /// Disc radius for closest-landmark offsets, unit box frame.
    pub offset_radius: f64,
}

/// Stage-local indexed pixels plus the difference pairs built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePool {
    anchors: Anchors,
    pairs: Vec<(u32, u32)>,
}

impl FeaturePool {
    pub fn new(anchors: Anchors, pairs: Vec<(u32, u32)>) -> Result<Self> {
        let p = anchors.len();
        if p == 0 {
            return Err(Error::Empty("feature pool anchors"));
        }
        for &(a, b) in &pairs {
            for index in [a as usize, b as usize] {
                if index >= p {
                    return Err(Error::IndexOutOfRange { index, len: p });
                }
            }
            if a == b {
                return Err(Error::InvalidConfig("difference pair uses the same anchor twice".into()));
            }
        }
        Ok(FeaturePool { anchors, pairs })
    }

    pub fn mode(&self) -> FeatureMode {
        self.anchors.mode()
    }

    pub fn anchors(&self) -> &Anchors {
        &self.anchors
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Number of difference features.
    pub fn feature_count(&self) -> usize {
        self.pairs.len()
    }

    /// Check every anchor against a landmark count.
    pub fn validate(&self, k: usize) -> Result<()> {
        match &self.anchors {
            Anchors::Tif(v) => v.iter().try_for_each(|a| a.validate(k)),
            Anchors::Pair(v) => v.iter().try_for_each(|a| a.validate(k)),
            Anchors::Offset(v) => v.iter().try_for_each(|a| a.validate(k)),
        }
    }

    /// Image positions of all anchors for `shape` (image pixels). `mean` is
    /// only consulted in offset mode.
    pub fn anchor_points(&self, shape: &Shape, mean: &Shape) -> Result<Vec<Point2>> {
        self.validate(shape.len())?;
        let pts = shape.points();
        Ok(match &self.anchors {
            Anchors::Tif(v) => v.iter().map(|a| a.eval(pts)).collect(),
            Anchors::Pair(v) => v.iter().map(|a| a.eval(pts)).collect(),
            Anchors::Offset(v) => {
                let t = similarity_fit(mean, shape)?;
                v.iter().map(|a| a.eval(pts, &t)).collect()
            }
        })
    }

    /// Sampled intensity at every anchor. The pool must already be validated
    /// for the shape's landmark count.
    pub(crate) fn intensities_into(&self, image: &Image, shape: &Shape, mean: &Shape, out: &mut Vec<u8>) -> Result<()> {
        out.clear();
        let pts = shape.points();
        match &self.anchors {
            Anchors::Tif(v) => out.extend(v.iter().map(|a| sample_intensity(image, a.eval(pts)))),
            Anchors::Pair(v) => out.extend(v.iter().map(|a| sample_intensity(image, a.eval(pts)))),
            Anchors::Offset(v) => {
                let t = similarity_fit(mean, shape)?;
                out.extend(v.iter().map(|a| sample_intensity(image, a.eval(pts, &t))));
            }
        }
        Ok(())
    }

    pub(crate) fn differences_into(&self, intensities: &[u8], out: &mut Vec<i32>) {
        out.clear();
        out.extend(self.pairs.iter().map(|&(a, b)| intensities[a as usize] as i32 - intensities[b as usize] as i32));
    }
}

/// Pixel differences `I(point_a) − I(point_b)` for every pair of the pool.
pub fn extract_features(image: &Image, shape: &Shape, mean: &Shape, pool: &FeaturePool) -> Result<Vec<i32>> {
    pool.validate(shape.len())?;
    let mut intensities = Vec::with_capacity(pool.anchors.len());
    pool.intensities_into(image, shape, mean, &mut intensities)?;
    let mut out = Vec::with_capacity(pool.pairs.len());
    pool.differences_into(&intensities, &mut out);
    Ok(out)
}

/// Draw a fresh pool for `k` landmarks.
pub fn sample_pool<R: Rng + ?Sized>(cfg: &PoolConfig, k: usize, rng: &mut R) -> Result<FeaturePool> {
    let needed = cfg.mode.min_landmarks();
    if k < needed {
        return Err(Error::TooFewLandmarks { needed, found: k });
    }
    if cfg.anchors == 0 {
        return Err(Error::Empty("feature pool anchors"));
    }
    let p = cfg.anchors;
    let anchors = match cfg.mode {
        FeatureMode::Tif => Anchors::Tif(
            (0..p)
                .map(|_| {
                    let mut tri = index::sample(rng, k, 3).into_vec();
                    let primary = rng.random_range(0..3);
                    tri.swap(0, primary);
                    TifIndex {
                        i: tri[0],
                        j: tri[1],
                        k: tri[2],
                        alpha: rng.random_range(TIF_RATIO_MIN..TIF_RATIO_MAX),
                        beta: rng.random_range(TIF_RATIO_MIN..TIF_RATIO_MAX),
                    }
                })
                .collect(),
        ),
        FeatureMode::Pair => Anchors::Pair(
            (0..p)
                .map(|_| {
                    let two = index::sample(rng, k, 2);
                    PairIndex { i: two.index(0), j: two.index(1), gamma: rng.random_range(0.0..=1.0) }
                })
                .collect(),
        ),
        FeatureMode::Offset => {
            if !(cfg.offset_radius.is_finite() && cfg.offset_radius >= 0.0) {
                return Err(Error::InvalidConfig("offset radius must be finite and non-negative".into()));
            }
            Anchors::Offset(
                (0..p)
                    .map(|_| {
                        let k = rng.random_range(0..k);
                        let r = cfg.offset_radius * math::sqrt(rng.random::<f64>());
                        let theta = 2.0 * PI * rng.random::<f64>();
                        LocalOffsetIndex { k, offset: Point2::new(r * math::cos(theta), r * math::sin(theta)) }
                    })
                    .collect(),
            )
        }
    };
    let pairs = sample_pairs(p, cfg.pairs, rng)?;
    FeaturePool::new(anchors, pairs)
}

/// `count` distinct unordered anchor pairs, each stored in random orientation.
fn sample_pairs<R: Rng + ?Sized>(p: usize, count: usize, rng: &mut R) -> Result<Vec<(u32, u32)>> {
    let available = p * p.saturating_sub(1) / 2;
    if count > available {
        return Err(Error::InvalidConfig(alloc::format!(
            "{count} difference pairs requested but {p} anchors only allow {available}"
        )));
    }
    let orient = |a: usize, b: usize, flip: bool| if flip { (b as u32, a as u32) } else { (a as u32, b as u32) };
    if count * 2 > available {
        let all: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
        let chosen = index::sample(rng, all.len(), count);
        return Ok(chosen
            .into_iter()
            .map(|i| {
                let (a, b) = all[i];
                orient(a, b, rng.random())
            })
            .collect());
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let ab = index::sample(rng, p, 2);
        let (a, b) = (ab.index(0), ab.index(1));
        if seen.insert((a.min(b), a.max(b))) {
            out.push((a as u32, b as u32));
        }
    }
    Ok(out)
}
