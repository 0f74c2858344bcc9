//! Shapes, face boxes and 2D transforms.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::math;

/// Squared centred norm below which a reference shape counts as degenerate.
pub const DEGENERATE_NORM_SQ: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation in a y-up frame (clockwise on screen).
    #[inline]
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, rhs: Point2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// An ordered, non-empty sequence of finite landmark coordinates.
///
/// Landmark order is semantic. Algorithms with stricter needs (three anchors
/// for triplet features, two for similarity fits) check the count themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    points: Vec<Point2>,
}

impl Shape {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("shape"));
        }
        if !points.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("shape"));
        }
        Ok(Shape { points })
    }

    /// Build from interleaved `[x0, y0, x1, y1, ...]` coordinates.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::LengthMismatch { what: "flat shape coordinates", left: coords.len(), right: coords.len() + 1 });
        }
        Shape::new(coords.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
    }

    pub(crate) fn from_vec_unchecked(points: Vec<Point2>) -> Self {
        debug_assert!(!points.is_empty());
        Shape { points }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    #[inline]
    pub fn point(&self, index: usize) -> Result<Point2> {
        self.points
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange { index, len: self.points.len() })
    }

    pub fn into_points(self) -> Vec<Point2> {
        self.points
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn centroid(&self) -> Point2 {
        let sum = self.points.iter().fold(Point2::ZERO, |acc, &p| acc + p);
        sum * (1.0 / self.points.len() as f64)
    }

    /// Apply `f` to every point, rejecting non-finite results.
    pub fn map(&self, mut f: impl FnMut(Point2) -> Point2) -> Result<Shape> {
        Shape::new(self.points.iter().map(|&p| f(p)).collect())
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::LandmarkCountMismatch { expected, found: self.len() });
        }
        Ok(())
    }
}

/// Axis-aligned face box in image pixels, `(x, y)` being the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite();
        if !finite || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox);
        }
        Ok(())
    }

    /// Geometric mean of the side lengths, used as the face-size normaliser.
    pub fn size(&self) -> f64 {
        math::sqrt(self.w * self.h)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    #[inline]
    pub fn to_unit(&self, p: Point2) -> Point2 {
        Point2::new((p.x - self.x) / self.w, (p.y - self.y) / self.h)
    }

    #[inline]
    pub fn from_unit(&self, p: Point2) -> Point2 {
        Point2::new(self.x + p.x * self.w, self.y + p.y * self.h)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// Map image-pixel landmarks into the unit frame of `bbox`.
pub fn normalize_shape(shape: &Shape, bbox: &BBox) -> Result<Shape> {
    bbox.validate()?;
    shape.map(|p| bbox.to_unit(p))
}

/// Inverse of [`normalize_shape`].
pub fn denormalize_shape(shape: &Shape, bbox: &BBox) -> Result<Shape> {
    bbox.validate()?;
    shape.map(|p| bbox.from_unit(p))
}

/// Coordinate-wise arithmetic mean of equally sized shapes.
pub fn mean_shape(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes.first().ok_or(Error::Empty("shape list"))?;
    let k = first.len();
    let mut acc = alloc::vec![Point2::ZERO; k];
    for s in shapes {
        s.check_len(k)?;
        for (a, &p) in acc.iter_mut().zip(s.points()) {
            *a += p;
        }
    }
    let inv = 1.0 / shapes.len() as f64;
    Shape::new(acc.into_iter().map(|p| p * inv).collect())
}

/// Uniform scale, rotation and translation: `p ↦ scale · R(rotation) · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub translation: Point2,
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform =
        SimilarityTransform { scale: 1.0, rotation: 0.0, translation: Point2::ZERO };

    pub fn apply(&self, p: Point2) -> Point2 {
        self.apply_linear(p) + self.translation
    }

    /// Scale and rotation only, for direction vectors.
    pub fn apply_linear(&self, v: Point2) -> Point2 {
        v.rotated(self.rotation) * self.scale
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let scale = 1.0 / self.scale;
        let rotation = -self.rotation;
        let translation = -(self.translation.rotated(rotation) * scale);
        SimilarityTransform { scale, rotation, translation }
    }

    pub fn apply_shape(&self, shape: &Shape) -> Result<Shape> {
        shape.map(|p| self.apply(p))
    }
}

/// Closed-form least-squares similarity taking `reference` onto `target`.
pub fn similarity_fit(reference: &Shape, target: &Shape) -> Result<SimilarityTransform> {
    target.check_len(reference.len())?;
    if reference.len() < 2 {
        return Err(Error::TooFewLandmarks { needed: 2, found: reference.len() });
    }
    let mr = reference.centroid();
    let mt = target.centroid();
    let (mut var, mut a, mut b) = (0.0, 0.0, 0.0);
    for (&r, &t) in reference.points().iter().zip(target.points()) {
        let (r, t) = (r - mr, t - mt);
        var += r.norm_sq();
        a += r.dot(t);
        b += r.cross(t);
    }
    if var < DEGENERATE_NORM_SQ {
        return Err(Error::DegenerateShape);
    }
    let (a, b) = (a / var, b / var);
    let scale = math::hypot(a, b);
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateShape);
    }
    let rotation = math::atan2(b, a);
    let linear = SimilarityTransform { scale, rotation, translation: Point2::ZERO };
    Ok(SimilarityTransform { translation: mt - linear.apply_linear(mr), ..linear })
}

/// General 2D affine map `p ↦ M·p + t`, with `M` row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub m: [[f64; 2]; 2],
    pub t: Point2,
}

impl Affine2 {
    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y + self.t.x,
            self.m[1][0] * p.x + self.m[1][1] * p.y + self.t.y,
        )
    }

    pub fn apply_shape(&self, shape: &Shape) -> Result<Shape> {
        shape.map(|p| self.apply(p))
    }
}
