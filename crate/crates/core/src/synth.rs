//! Procedural face-like images with exact landmark annotations.
//!
//! A face is a bright ellipse with darker blobs for eyes, nose, mouth and ears
//! on a cluttered, noisy background. Landmarks come from a built-in 3D layout
//! ([`Model3D::builtin`]) rotated by the sampled head pose and projected
//! orthographically. The blobs are drawn as ellipses pushed through the same
//! projection, so out-of-plane rotation appears as anisotropic foreshortening
//! combined with in-plane rotation.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Image, Sample};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2, Shape};
use crate::headpose::{rotation_from_euler, EulerAngles, Mat3, Model3D};
use crate::math;
use crate::par;
use crate::rng::{rng_for, stream};

pub const MIN_IMAGE_SIZE: u32 = 32;
/// Largest supported |yaw| and |pitch|; beyond it the projected face degenerates.
pub const MAX_OUT_OF_PLANE: f64 = 60.0;

/// Law of the in-plane (roll) angle, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum PoseDistribution {
    Gaussian { mean: f64, std: f64 },
    Uniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    pub count: usize,
    /// Side of the square images, pixels.
    pub image_size: u32,
    /// 5 (eyes, nose, mouth corners), 8 (sheep-like) or 68 (iBUG-like).
    pub landmarks: usize,
    pub roll: PoseDistribution,
    /// Yaw and pitch are uniform in `[-out_of_plane, out_of_plane]` degrees.
    pub out_of_plane: f64,
    /// Standard deviation of additive pixel noise.
    pub noise: f64,
    /// Relative detector-style jitter of the face box.
    pub box_jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 100,
            image_size: 128,
            landmarks: 5,
            roll: PoseDistribution::Gaussian { mean: 0.0, std: 15.0 },
            out_of_plane: 20.0,
            noise: 8.0,
            box_jitter: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("count must be positive".into()));
        }
        if Model3D::builtin(self.landmarks).is_none() {
            return Err(Error::InvalidConfig(format!("no synthetic layout with {} landmarks (use 5, 8 or 68)", self.landmarks)));
        }
        if self.image_size < MIN_IMAGE_SIZE {
            return Err(Error::ImageTooSmall { size: self.image_size, min: MIN_IMAGE_SIZE });
        }
        match self.roll {
            PoseDistribution::Gaussian { mean, std } if !(mean.is_finite() && std.is_finite() && std >= 0.0) => {
                return Err(Error::InvalidConfig("roll std must be finite and non-negative".into()));
            }
            PoseDistribution::Uniform { min, max } if !(min.is_finite() && max.is_finite() && min <= max) => {
                return Err(Error::InvalidConfig("roll range must satisfy min <= max".into()));
            }
            _ => {}
        }
        if !(self.out_of_plane >= 0.0 && self.out_of_plane <= MAX_OUT_OF_PLANE) {
            return Err(Error::InvalidConfig(format!("out_of_plane must be in [0, {MAX_OUT_OF_PLANE}]")));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig("noise std must be finite and non-negative".into()));
        }
        if !(self.box_jitter >= 0.0 && self.box_jitter < 0.5) {
            return Err(Error::InvalidConfig("box_jitter must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Anchor {
    Landmark(usize),
    /// Ellipse stretched along the segment between two landmarks.
    Between(usize, usize),
    Fixed([f64; 3]),
}

#[derive(Clone, Copy)]
enum Tone {
    Face,
    Dark,
    Mid,
    Ear,
}

#[derive(Clone, Copy)]
struct Part {
    anchor: Anchor,
    /// Half axes; for `Between` the first is padding added to half the segment length.
    radii: (f64, f64),
    tone: Tone,
}

const fn part(anchor: Anchor, rx: f64, ry: f64, tone: Tone) -> Part {
    Part { anchor, radii: (rx, ry), tone }
}

const FACE: Anchor = Anchor::Fixed([0.0, -0.1, 0.0]);

/// Parts in painting order.
fn parts(k: usize) -> Vec<Part> {
    use Anchor::*;
    use Tone::*;
    match k {
        5 => alloc::vec![
            part(Fixed([-0.82, -0.1, 0.25]), 0.12, 0.24, Ear),
            part(Fixed([0.82, -0.1, 0.25]), 0.12, 0.24, Ear),
            part(FACE, 0.82, 0.92, Face),
            part(Landmark(0), 0.13, 0.065, Dark),
            part(Landmark(1), 0.13, 0.065, Dark),
            part(Landmark(2), 0.09, 0.13, Mid),
            part(Between(3, 4), 0.03, 0.07, Dark),
        ],
        8 => alloc::vec![
            part(Landmark(0), 0.3, 0.12, Ear),
            part(Landmark(1), 0.3, 0.12, Ear),
            part(Fixed([0.0, 0.15, 0.0]), 0.58, 1.1, Face),
            part(Landmark(2), 0.11, 0.07, Dark),
            part(Landmark(3), 0.11, 0.07, Dark),
            part(Landmark(4), 0.06, 0.05, Dark),
            part(Landmark(5), 0.06, 0.05, Dark),
            part(Between(6, 7), 0.03, 0.05, Dark),
        ],
        _ => alloc::vec![
            part(Fixed([-0.84, -0.15, 0.25]), 0.12, 0.24, Ear),
            part(Fixed([0.84, -0.15, 0.25]), 0.12, 0.24, Ear),
            part(FACE, 0.82, 0.92, Face),
            part(Between(17, 21), 0.03, 0.035, Mid),
            part(Between(22, 26), 0.03, 0.035, Mid),
            part(Between(36, 39), 0.02, 0.055, Dark),
            part(Between(42, 45), 0.02, 0.055, Dark),
            part(Between(27, 30), 0.02, 0.05, Mid),
            part(Between(31, 35), 0.03, 0.06, Mid),
            part(Between(48, 54), 0.02, 0.12, Dark),
        ],
    }
}

/// Ellipse in image pixels: `|A·(p − c)|² ≤ 1`.
struct Ellipse {
    center: Point2,
    inv: [[f64; 2]; 2],
    half_extent: Point2,
}

impl Ellipse {
    fn contains(&self, p: Point2) -> bool {
        let d = p - self.center;
        let u = self.inv[0][0] * d.x + self.inv[0][1] * d.y;
        let v = self.inv[1][0] * d.x + self.inv[1][1] * d.y;
        u * u + v * v <= 1.0
    }
}

struct Projection {
    rotation: Mat3,
    scale: f64,
    center: Point2,
}

impl Projection {
    fn point(&self, p: &[f64; 3]) -> Point2 {
        let r = &self.rotation;
        let x = r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2];
        let y = r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2];
        self.center + Point2::new(x, y) * self.scale
    }

    /// Project a planar ellipse with centre `c`, unit major direction `axis`
    /// (model xy plane) and half axes `a`, `b`.
    fn ellipse(&self, c: &[f64; 3], axis: Point2, a: f64, b: f64) -> Option<Ellipse> {
        let r = &self.rotation;
        // Columns map the local (major, minor) coordinates to image offsets.
        let minor = Point2::new(-axis.y, axis.x);
        let col = |d: Point2| {
            Point2::new(r[0][0] * d.x + r[0][1] * d.y, r[1][0] * d.x + r[1][1] * d.y) * self.scale
        };
        let (m0, m1) = (col(axis) * a, col(minor) * b);
        let det = m0.x * m1.y - m1.x * m0.y;
        if libm::fabs(det) < 1e-9 {
            return None;
        }
        let inv = [[m1.y / det, -m1.x / det], [-m0.y / det, m0.x / det]];
        let half_extent = Point2::new(math::hypot(m0.x, m1.x), math::hypot(m0.y, m1.y));
        Some(Ellipse { center: self.point(c), inv, half_extent })
    }
}

fn fill(canvas: &mut [f64], size: u32, e: &Ellipse, level: f64) {
    let lo_x = math::floor(e.center.x - e.half_extent.x).max(0.0) as u32;
    let hi_x = (math::ceil(e.center.x + e.half_extent.x).max(0.0) as u32).min(size - 1);
    let lo_y = math::floor(e.center.y - e.half_extent.y).max(0.0) as u32;
    let hi_y = (math::ceil(e.center.y + e.half_extent.y).max(0.0) as u32).min(size - 1);
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            if e.contains(Point2::new(x as f64, y as f64)) {
                canvas[(y * size + x) as usize] = level;
            }
        }
    }
}

fn draw_pose<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> EulerAngles {
    let roll = match cfg.roll {
        PoseDistribution::Gaussian { mean, std } => {
            if std > 0.0 {
                Normal::new(mean, std).map(|n| n.sample(rng)).unwrap_or(mean)
            } else {
                mean
            }
        }
        PoseDistribution::Uniform { min, max } => {
            if max > min {
                rng.random_range(min..=max)
            } else {
                min
            }
        }
    };
    let mut oop = || if cfg.out_of_plane > 0.0 { rng.random_range(-cfg.out_of_plane..=cfg.out_of_plane) } else { 0.0 };
    let yaw = oop();
    let pitch = oop();
    EulerAngles::new(pitch, yaw, roll)
}

fn generate_one(cfg: &SynthConfig, index: usize) -> Result<Sample> {
    let mut rng = rng_for(cfg.seed, stream::SYNTH_SAMPLE, index as u64);
    let size = cfg.image_size;
    let sz = size as f64;
    let unit = Normal::new(0.0, 1.0).map_err(|_| Error::Numeric("normal law".into()))?;

    // Individual face: landmark jitter and overall proportions.
    let width = rng.random_range(0.9..1.1);
    let height = rng.random_range(0.92..1.08);
    let layout = Model3D::builtin(cfg.landmarks).ok_or_else(|| Error::InvalidConfig("layout".into()))?;
    let points: Vec<[f64; 3]> = layout
        .points()
        .iter()
        .map(|p| {
            [
                p[0] * width + 0.025 * unit.sample(&mut rng),
                p[1] * height + 0.025 * unit.sample(&mut rng),
                p[2] + 0.02 * unit.sample(&mut rng),
            ]
        })
        .collect();

    let pose = draw_pose(cfg, &mut rng);
    let scale = sz * rng.random_range(0.22..0.3);
    let margin = 1.35 * scale;
    let center = Point2::new(rng.random_range(margin..=sz - margin), rng.random_range(margin..=sz - margin));
    let proj = Projection { rotation: rotation_from_euler(pose), scale, center };

    // Background with a gradient and clutter.
    let bg = rng.random_range(20.0..100.0);
    let grad = rng.random_range(0.0..40.0) / sz;
    let theta = rng.random_range(0.0..core::f64::consts::TAU);
    let (gx, gy) = (grad * math::cos(theta), grad * math::sin(theta));
    let mut canvas: Vec<f64> =
        (0..size * size).map(|i| bg + gx * (i % size) as f64 + gy * (i / size) as f64).collect();
    for _ in 0..3 {
        let c = Point2::new(rng.random_range(0.0..sz), rng.random_range(0.0..sz));
        let (a, b) = (rng.random_range(0.05..0.2) * sz, rng.random_range(0.05..0.2) * sz);
        let phi: f64 = rng.random_range(0.0..core::f64::consts::PI);
        let (s, co) = (math::sin(phi), math::cos(phi));
        let e = Ellipse {
            center: c,
            inv: [[co / a, s / a], [-s / b, co / b]],
            half_extent: Point2::new(a.max(b), a.max(b)),
        };
        let level = rng.random_range(10.0..160.0);
        fill(&mut canvas, size, &e, level);
    }

    let face = rng.random_range(140.0..210.0);
    let dark = face - rng.random_range(80.0..120.0);
    let mid = face - rng.random_range(35.0..60.0);
    let ear = face - rng.random_range(15.0..30.0);
    let mut face_outline = None;
    for p in parts(cfg.landmarks) {
        let (c, axis, a, b) = match p.anchor {
            Anchor::Landmark(i) => (points[i], Point2::new(1.0, 0.0), p.radii.0, p.radii.1),
            Anchor::Fixed(c) => (c, Point2::new(1.0, 0.0), p.radii.0, p.radii.1),
            Anchor::Between(i, j) => {
                let (pi, pj) = (points[i], points[j]);
                let c = [0.5 * (pi[0] + pj[0]), 0.5 * (pi[1] + pj[1]), 0.5 * (pi[2] + pj[2])];
                let d = Point2::new(pj[0] - pi[0], pj[1] - pi[1]);
                let len = d.norm().max(1e-9);
                (c, d * (1.0 / len), 0.5 * len + p.radii.0, p.radii.1)
            }
        };
        let level = match p.tone {
            Tone::Face => face,
            Tone::Dark => dark,
            Tone::Mid => mid,
            Tone::Ear => ear,
        };
        if let Some(e) = proj.ellipse(&c, axis, a, b) {
            fill(&mut canvas, size, &e, level);
        }
        if matches!(p.tone, Tone::Face) {
            face_outline = Some((c, a, b));
        }
    }

    let data = canvas
        .into_iter()
        .map(|v| {
            let v = if cfg.noise > 0.0 { v + cfg.noise * unit.sample(&mut rng) } else { v };
            math::round(v).clamp(0.0, 255.0) as u8
        })
        .collect();
    let image = Image::new(size, size, data)?;

    let truth = Shape::new(points.iter().map(|p| proj.point(p)).collect())?;

    // Tight box around the face outline and landmarks, then detector-like jitter.
    let mut extent: Vec<Point2> = truth.points().to_vec();
    if let Some((c, a, b)) = face_outline {
        for i in 0..48 {
            let t = core::f64::consts::TAU * i as f64 / 48.0;
            extent.push(proj.point(&[c[0] + a * math::cos(t), c[1] + b * math::sin(t), c[2]]));
        }
    }
    let (mut x0, mut y0, mut x1, mut y1) = bounds(&extent);
    let pad = 0.04 * (x1 - x0).max(y1 - y0);
    x0 -= pad;
    y0 -= pad;
    x1 += pad;
    y1 += pad;
    let j = cfg.box_jitter;
    let (w, h) = (x1 - x0, y1 - y0);
    let (cx, cy) = (0.5 * (x0 + x1) + w * jitter(&mut rng, j), 0.5 * (y0 + y1) + h * jitter(&mut rng, j));
    let (w, h) = (w * (1.0 + jitter(&mut rng, j)), h * (1.0 + jitter(&mut rng, j)));
    let (mut bx0, mut by0, mut bx1, mut by1) = (cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
    let (lx0, ly0, lx1, ly1) = bounds(truth.points());
    bx0 = bx0.min(lx0 - 1.0);
    by0 = by0.min(ly0 - 1.0);
    bx1 = bx1.max(lx1 + 1.0);
    by1 = by1.max(ly1 + 1.0);
    let bbox = BBox::new(bx0, by0, bx1 - bx0, by1 - by0)?;

    Ok(Sample { id: format!("synth_{index:05}"), image, bbox, truth: Some(truth), pose: Some(pose) })
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, j: f64) -> f64 {
    if j > 0.0 {
        rng.random_range(-j..=j)
    } else {
        0.0
    }
}

fn bounds(points: &[Point2]) -> (f64, f64, f64, f64) {
    points.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b, c, d), p| {
        (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y))
    })
}

/// Generate `cfg.count` samples. Each sample draws from its own seed stream,
/// so the output is a pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    par::map_indexed(cfg.count, |i| generate_one(cfg, i)).into_iter().collect()
}

/// Generate a single sample of the dataset described by `cfg`.
pub fn generate_sample(cfg: &SynthConfig, index: usize) -> Result<Sample> {
    cfg.validate()?;
    generate_one(cfg, index)
}
