use std::path::Path;

use image::{DynamicImage, GrayImage};
use landmark_cascade_core::Image;

use crate::error::{Error, Result};

/// Decode any supported image into 8-bit grayscale. Colour images use the
/// integer 299/587/114 luma weights.
pub fn read_gray(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width(), img.height());
    Ok(match img {
        DynamicImage::ImageLuma8(g) => Image::new(w, h, g.into_raw())?,
        other => Image::from_rgb(w, h, other.to_rgb8().as_raw())?,
    })
}

pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let buf = GrayImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .ok_or_else(|| Error::Data("image buffer size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

