use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

use super::{BinaryMask, Image};

const PRED_TINT: [f32; 3] = [40.0, 90.0, 255.0];
const CONTOUR: [u8; 3] = [255, 32, 32];

fn is_edge(mask: &BinaryMask, x: u32, y: u32) -> bool {
    if !mask.get(x, y) {
        return false;
    }
    let (w, h) = (mask.width(), mask.height());
    x == 0 || y == 0 || x + 1 == w || y + 1 == h
        || !mask.get(x - 1, y)
        || !mask.get(x + 1, y)
        || !mask.get(x, y - 1)
        || !mask.get(x, y + 1)
}

/// Gray scan with predicted pixels tinted blue and the ground-truth outline
/// drawn in red.
pub fn render_overlay(img: &Image, gt: Option<&BinaryMask>, pred: &BinaryMask) -> Result<RgbImage> {
    img.ensure_same_size(pred)?;
    if let Some(gt) = gt {
        img.ensure_same_size(gt)?;
    }
    let mut out = RgbImage::new(img.width(), img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y) as f32;
            let mut px = [v as u8; 3];
            if pred.get(x, y) {
                for (c, tint) in px.iter_mut().zip(PRED_TINT) {
                    *c = (0.55 * v + 0.45 * tint).round() as u8;
                }
            }
            if gt.is_some_and(|g| is_edge(g, x, y)) {
                px = CONTOUR;
            }
            out.put_pixel(x, y, Rgb(px));
        }
    }
    Ok(out)
}

pub fn write_overlay(path: &Path, overlay: &RgbImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    overlay.save(path).map_err(|e| Error::image(path, e))
}
