//! Grayscale images and annotated samples.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2, Shape};
use crate::headpose::EulerAngles;
use crate::math;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("image"));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::LengthMismatch { what: "image data", left: data.len(), right: expected });
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Image::new(width, height, alloc::vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image::new(width, height, data)
    }

    /// Convert interleaved 8-bit RGB to grayscale with [`to_grayscale`].
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if rgb.len() != expected {
            return Err(Error::LengthMismatch { what: "rgb data", left: rgb.len(), right: expected });
        }
        Image::new(width, height, rgb.chunks_exact(3).map(|c| to_grayscale(c[0], c[1], c[2])).collect())
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Rec. 601 luma, rounded half up in exact integer arithmetic.
pub fn to_grayscale(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

#[inline]
fn clamp_coord(v: f64, dim: u32) -> usize {
    let r = math::round(v);
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= (dim - 1) as f64 {
        (dim - 1) as usize
    } else {
        r as usize
    }
}

/// Nearest-pixel lookup with each coordinate clamped to the image. Total:
/// points far outside the image read the nearest edge pixel.
#[inline]
pub fn sample_intensity(image: &Image, p: Point2) -> u8 {
    let x = clamp_coord(p.x, image.width);
    let y = clamp_coord(p.y, image.height);
    image.data[y * image.width as usize + x]
}

/// One face: image, face box and optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub bbox: BBox,
    /// Landmarks in image pixels.
    pub truth: Option<Shape>,
    pub pose: Option<EulerAngles>,
}

impl Sample {
    pub fn truth(&self) -> Result<&Shape> {
        self.truth.as_ref().ok_or(Error::Empty("sample annotation"))
    }
}

/// Check that every annotated sample has `k` landmarks.
pub fn check_landmark_count(samples: &[Sample], k: usize) -> Result<()> {
    for s in samples {
        if let Some(t) = &s.truth {
            t.check_len(k)?;
        }
    }
    Ok(())
}
