//! PNG encoding for images and masks.
//!
//! * [`Image`]: 8-bit gray. Color inputs are reduced with integer luma
//!   `round(0.299 R + 0.587 G + 0.114 B)`.
//! * [`BinaryMask`]: 8-bit gray, 0 or 255. On read, any value >= 128 is set.
//! * [`ProbMask`]: 16-bit gray with `prob = v / 65535`, or 8-bit gray with
//!   `prob = v / 255` for the model exchange directory.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::geometry::ImageSize;

use super::{BinaryMask, Image, ProbMask, Raster};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::image(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Converts any decoded image to 8-bit gray.
pub fn decode_gray(img: &DynamicImage) -> Image {
    let size = ImageSize::new(img.width(), img.height());
    let data = match img {
        DynamicImage::ImageLuma8(buf) => buf.as_raw().clone(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
            })
            .collect(),
    };
    Raster::from_vec(size, data).expect("decoded image has consistent shape")
}

pub fn read_gray(path: &Path) -> Result<Image> {
    Ok(decode_gray(&open(path)?))
}

pub fn write_gray(path: &Path, img: &Image) -> Result<()> {
    ensure_parent(path)?;
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width(), img.height(), img.as_slice().to_vec()).expect("shape checked");
    buf.save(path).map_err(|e| Error::image(path, e))
}

pub fn read_binary_mask(path: &Path) -> Result<BinaryMask> {
    Ok(read_gray(path)?.map(|v| v >= 128))
}

pub fn write_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    write_gray(path, &mask.map(|b| if b { 255 } else { 0 }))
}

pub fn read_prob_mask16(path: &Path) -> Result<ProbMask> {
    let img = open(path)?;
    let size = ImageSize::new(img.width(), img.height());
    let data = img.into_luma16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect();
    Raster::from_vec(size, data)
}

pub fn write_prob_mask16(path: &Path, mask: &ProbMask) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u16> = mask.as_slice().iter().map(|&p| (p as f64 * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(mask.width(), mask.height(), raw).expect("shape checked");
    buf.save(path).map_err(|e| Error::image(path, e))
}

pub fn read_prob_mask8(path: &Path) -> Result<ProbMask> {
    Ok(read_gray(path)?.to_prob())
}

pub fn write_prob_mask8(path: &Path, mask: &ProbMask) -> Result<()> {
    write_gray(path, &mask.map(|p| (p as f64 * 255.0).round() as u8))
}
