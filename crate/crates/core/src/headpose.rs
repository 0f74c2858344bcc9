//! Head pose from 2D landmarks and a rigid 3D model via POSIT.
//!
//! Frames: image x to the right, y down; camera z looks into the scene. Model
//! points use the same axes, so the identity rotation is a frontal face. Euler
//! angles follow `R = Rz(roll) · Ry(yaw) · Rx(pitch)`, in degrees.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Shape};
use crate::math;

pub type Mat3 = [[f64; 3]; 3];

/// Gram-matrix condition number above which model points count as coplanar.
pub const MAX_MODEL_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EulerAngles {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub const fn new(pitch: f64, yaw: f64, roll: f64) -> Self {
        EulerAngles { pitch, yaw, roll }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model3D {
    points: Vec<[f64; 3]>,
}

impl Model3D {
    /// Needs at least four finite, non-coplanar points.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::TooFewLandmarks { needed: 4, found: points.len() });
        }
        if !points.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("3D model"));
        }
        let gram = gram(&relative(&points));
        let [hi, _, lo] = sym_eigenvalues(&gram);
        if !(lo > 0.0) || hi / lo > MAX_MODEL_CONDITION {
            return Err(Error::DegenerateModel);
        }
        Ok(Model3D { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coarse 68-point human face in the iBUG ordering (face half-height 1).
    pub fn face68() -> Model3D {
        Model3D { points: layouts::face68() }
    }

    /// Eye centres, nose tip and mouth corners.
    pub fn face5() -> Model3D {
        Model3D { points: layouts::face5() }
    }

    /// Ears, eyes, nostrils and mouth corners of an elongated sheep-like face.
    pub fn sheep8() -> Model3D {
        Model3D { points: layouts::sheep8() }
    }

    /// Built-in model for a landmark count, if one exists.
    pub fn builtin(k: usize) -> Option<Model3D> {
        match k {
            5 => Some(Model3D::face5()),
            8 => Some(Model3D::sheep8()),
            68 => Some(Model3D::face68()),
            _ => None,
        }
    }
}

mod layouts {
    use super::*;

    pub(super) fn face5() -> Vec<[f64; 3]> {
        alloc::vec![
            [-0.35, -0.25, -0.28],
            [0.35, -0.25, -0.28],
            [0.0, 0.12, -0.62],
            [-0.28, 0.5, -0.35],
            [0.28, 0.5, -0.35],
        ]
    }

    pub(super) fn sheep8() -> Vec<[f64; 3]> {
        alloc::vec![
            [-0.85, -0.65, 0.15],
            [0.85, -0.65, 0.15],
            [-0.38, -0.3, -0.2],
            [0.38, -0.3, -0.2],
            [-0.13, 0.78, -0.55],
            [0.13, 0.78, -0.55],
            [-0.17, 1.02, -0.45],
            [0.17, 1.02, -0.45],
        ]
    }

    pub(super) fn face68() -> Vec<[f64; 3]> {
        let mut p = Vec::with_capacity(68);
        // Jaw line, left ear to right ear via the chin.
        for i in 0..17 {
            let phi = PI * i as f64 / 16.0;
            let c = math::cos(phi);
            p.push([-0.8 * c, -0.15 + 0.95 * math::sin(phi), 0.25 * c * c - 0.05]);
        }
        // Brows.
        for side in [-1.0, 1.0] {
            for i in 0..5 {
                let t = i as f64 / 4.0;
                let x = if side < 0.0 { -0.62 + 0.48 * t } else { 0.14 + 0.48 * t };
                let arch = math::sin(PI * t);
                p.push([x, -0.45 - 0.08 * arch, -0.3 - 0.05 * arch]);
            }
        }
        // Nose bridge.
        for i in 0..4 {
            let t = i as f64 / 3.0;
            p.push([0.0, -0.3 + 0.4 * t, -0.38 - 0.24 * t]);
        }
        // Nose base.
        for i in 0..5 {
            let x = -0.16 + 0.08 * i as f64;
            p.push([x, 0.2 - 0.03 * (1.0 - libm::fabs(x) / 0.16), -0.45 - 0.08 * (1.0 - libm::fabs(x) / 0.16)]);
        }
        // Eyes: outer corner, upper lid, inner corner, lower lid.
        for cx in [-0.35, 0.35] {
            for a in [180.0, 120.0, 60.0, 0.0, -60.0, -120.0] {
                let a = math::rad(a);
                p.push([cx + 0.13 * math::cos(a), -0.25 - 0.05 * math::sin(a), -0.28]);
            }
        }
        // Outer lip, starting at the left corner, over the top then along the bottom.
        for i in 0..12 {
            let a = PI - 2.0 * PI * i as f64 / 12.0;
            p.push([0.3 * math::cos(a), 0.5 - 0.13 * math::sin(a), -0.35 - 0.05 * libm::fabs(math::sin(a))]);
        }
        // Inner lip.
        for i in 0..8 {
            let a = PI - 2.0 * PI * i as f64 / 8.0;
            p.push([0.2 * math::cos(a), 0.5 - 0.05 * math::sin(a), -0.37]);
        }
        p
    }
}

/// Focal length and principal point, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub focal: f64,
    pub principal: Point2,
}

impl CameraIntrinsics {
    pub fn new(focal: f64, principal: Point2) -> Result<Self> {
        if !(focal.is_finite() && focal > 0.0) || !principal.is_finite() {
            return Err(Error::InvalidConfig("focal length must be positive and finite".into()));
        }
        Ok(CameraIntrinsics { focal, principal })
    }

    /// Focal length 1.5 × image width, principal point at the image centre.
    pub fn for_image(width: u32, height: u32) -> Self {
        CameraIntrinsics {
            focal: 1.5 * width as f64,
            principal: Point2::new(0.5 * width as f64, 0.5 * height as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub angles: EulerAngles,
    /// Model→camera rotation, rows are the camera axes in model coordinates.
    pub rotation: Mat3,
    /// Camera-frame position of model point 0.
    pub translation: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [dot(&a[0], v), dot(&a[1], v), dot(&a[2], v)]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: &[f64; 3]) -> f64 {
    math::sqrt(dot(a, a))
}

fn scaled(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `Rz(roll) · Ry(yaw) · Rx(pitch)` from angles in degrees.
pub fn rotation_from_euler(angles: EulerAngles) -> Mat3 {
    let (sp, cp) = (math::sin(math::rad(angles.pitch)), math::cos(math::rad(angles.pitch)));
    let (sy, cy) = (math::sin(math::rad(angles.yaw)), math::cos(math::rad(angles.yaw)));
    let (sr, cr) = (math::sin(math::rad(angles.roll)), math::cos(math::rad(angles.roll)));
    let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

fn wrap_degrees(a: f64) -> f64 {
    if a <= -180.0 {
        a + 360.0
    } else if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// Inverse of [`rotation_from_euler`]. At `|yaw| = 90°` roll is fixed to zero.
pub fn euler_from_rotation(r: &Mat3) -> Result<EulerAngles> {
    if !r.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("rotation"));
    }
    for i in 0..3 {
        for j in 0..3 {
            let g: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if libm::fabs(g - target) >= 1e-6 {
                return Err(Error::NotOrthonormal);
            }
        }
    }
    let s = (-r[2][0]).clamp(-1.0, 1.0);
    let yaw = math::asin(s);
    let (pitch, roll) = if libm::fabs(s) > 1.0 - 1e-12 {
        (math::atan2(-r[1][2], r[1][1]), 0.0)
    } else {
        (math::atan2(r[2][1], r[2][2]), math::atan2(r[1][0], r[0][0]))
    };
    Ok(EulerAngles {
        pitch: wrap_degrees(math::deg(pitch)),
        yaw: wrap_degrees(math::deg(yaw)),
        roll: wrap_degrees(math::deg(roll)),
    })
}

/// The signed angle of largest magnitude; ties resolve pitch, then yaw, then roll.
pub fn significant_angle(angles: &EulerAngles) -> f64 {
    let mut best = angles.pitch;
    for a in [angles.yaw, angles.roll] {
        if libm::fabs(a) > libm::fabs(best) {
            best = a;
        }
    }
    best
}

fn relative(points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let o = points[0];
    points[1..].iter().map(|p| [p[0] - o[0], p[1] - o[1], p[2] - o[2]]).collect()
}

fn gram(rows: &[[f64; 3]]) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    for r in rows {
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

/// Eigenvalues of a symmetric 3×3 matrix, descending.
fn sym_eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let (d0, d1, d2) = (a[0][0] - q, a[1][1] - q, a[2][2] - q);
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    if p2 <= 0.0 {
        return [q, q, q];
    }
    let p = math::sqrt(p2 / 6.0);
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (det(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = math::acos(r) / 3.0;
    let e1 = q + 2.0 * p * math::cos(phi);
    let e3 = q + 2.0 * p * math::cos(phi + 2.0 * PI / 3.0);
    [e1, 3.0 * q - e1 - e3, e3]
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Mat3) -> Option<Mat3> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
        }
    }
    Some(inv)
}

/// Iterative pose from orthography and scaling.
///
/// Starts from the scaled-orthographic solution and repeatedly corrects the
/// image points by the perspective terms `ε_i = (M_i − M_0)·k / Z_0` until the
/// largest change of any `ε_i` drops below `tol`. Failure to converge within
/// `max_iter` is reported through [`PoseEstimate::converged`].
pub fn posit(
    points2d: &Shape,
    model: &Model3D,
    cam: &CameraIntrinsics,
    tol: f64,
    max_iter: usize,
) -> Result<PoseEstimate> {
    points2d.check_len(model.len())?;
    let obj = relative(&model.points);
    let inv_gram = inverse(&gram(&obj)).ok_or(Error::DegenerateModel)?;
    // Pseudo-inverse rows: B = (AᵀA)⁻¹ Aᵀ, stored as one 3-vector per object point.
    let pinv: Vec<[f64; 3]> = obj.iter().map(|a| mat_vec(&inv_gram, a)).collect();

    let img: Vec<Point2> = points2d.points().iter().map(|&p| p - cam.principal).collect();
    let origin = img[0];
    let mut eps = alloc::vec![0.0; obj.len()];
    let mut rotation = [[0.0; 3]; 3];
    let mut scale = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut i_vec = [0.0; 3];
        let mut j_vec = [0.0; 3];
        for ((b, p), e) in pinv.iter().zip(&img[1..]).zip(&eps) {
            let xp = p.x * (1.0 + e) - origin.x;
            let yp = p.y * (1.0 + e) - origin.y;
            for d in 0..3 {
                i_vec[d] += b[d] * xp;
                j_vec[d] += b[d] * yp;
            }
        }
        let (s1, s2) = (norm(&i_vec), norm(&j_vec));
        if !(s1 > 0.0 && s2 > 0.0) || !(s1.is_finite() && s2.is_finite()) {
            return Err(Error::Numeric("POSIT produced a zero scale".into()));
        }
        let i_hat = scaled(&i_vec, 1.0 / s1);
        let j_raw = scaled(&j_vec, 1.0 / s2);
        let k_raw = cross(&i_hat, &j_raw);
        let k_hat = scaled(&k_raw, 1.0 / norm(&k_raw));
        let j_hat = cross(&k_hat, &i_hat);
        rotation = [i_hat, j_hat, k_hat];
        scale = 0.5 * (s1 + s2);
        let z0 = cam.focal / scale;

        let mut delta: f64 = 0.0;
        for (e, a) in eps.iter_mut().zip(&obj) {
            let next = dot(a, &k_hat) / z0;
            delta = delta.max(libm::fabs(next - *e));
            *e = next;
        }
        if !delta.is_finite() {
            return Err(Error::Numeric("POSIT diverged".into()));
        }
        if delta < tol {
            converged = true;
            break;
        }
    }
    let z0 = cam.focal / scale;
    let translation = [origin.x * z0 / cam.focal, origin.y * z0 / cam.focal, z0];
    Ok(PoseEstimate { angles: euler_from_rotation(&rotation)?, rotation, translation, converged, iterations })
}
