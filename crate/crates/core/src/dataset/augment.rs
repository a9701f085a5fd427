//! Classical augmentation: random horizontal flip, rotation, isotropic
//! scale, brightness and contrast.
//!
//! Geometric transforms act about the image center and are applied by
//! inverse mapping: image pixels are sampled bilinearly and masks with
//! nearest neighbour; samples outside the source are background (0).
//! Photometric changes touch the image only. Every copy draws its parameters
//! from a seed derived from `(seed, record id, copy index, attempt)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::{BinaryMask, Image};

use super::seed::derive_seed;
use super::{DatasetRecord, GtInstance};

/// Copies per record, for a dataset six times its original size.
pub const DEFAULT_COPIES: usize = 5;

const MAX_ATTEMPTS: u64 = 10;
const MAX_ROTATION_DEG: f64 = 15.0;
const SCALE_RANGE: (f64, f64) = (0.9, 1.1);
const MAX_BRIGHTNESS: f64 = 20.0;
const CONTRAST_RANGE: (f64, f64) = (0.8, 1.2);
const CONTRAST_PIVOT: f64 = 128.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub flip: bool,
    pub angle_deg: f64,
    pub scale: f64,
    /// Added to every intensity.
    pub brightness: f64,
    /// Gain about mid-gray.
    pub contrast: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self { flip: false, angle_deg: 0.0, scale: 1.0, brightness: 0.0, contrast: 1.0 }
    }
}

impl AugmentParams {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            flip: rng.random_bool(0.5),
            angle_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            scale: rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1),
            brightness: rng.random_range(-MAX_BRIGHTNESS..=MAX_BRIGHTNESS),
            contrast: rng.random_range(CONTRAST_RANGE.0..=CONTRAST_RANGE.1),
        }
    }

    /// Parameters for one attempt at one copy of one record.
    pub fn for_copy(record_id: &str, copy: usize, attempt: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "augment", record_id, &[copy as u64, attempt]));
        Self::sample(&mut rng)
    }

    /// Maps a destination pixel center to its source coordinate.
    pub fn source_coord(&self, u: f64, v: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (sin, cos) = self.angle_deg.to_radians().sin_cos();
        let (dx, dy) = (u - cx, v - cy);
        // undo rotation, then scale, then the flip
        let mut qx = (cos * dx + sin * dy) / self.scale;
        let qy = (-sin * dx + cos * dy) / self.scale;
        if self.flip {
            qx = -qx;
        }
        (cx + qx, cy + qy)
    }
}

fn center(w: u32, h: u32) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Geometric part of `params` applied to a mask (nearest neighbour).
pub fn warp_mask(mask: &BinaryMask, params: &AugmentParams) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let (cx, cy) = center(w, h);
    BinaryMask::from_fn(mask.size(), |u, v| {
        let (sx, sy) = params.source_coord(u as f64, v as f64, cx, cy);
        let (ix, iy) = ((sx + 0.5).floor(), (sy + 0.5).floor());
        ix >= 0.0 && iy >= 0.0 && ix < w as f64 && iy < h as f64 && mask.get(ix as u32, iy as u32)
    })
}

fn warp_image(img: &Image, params: &AugmentParams) -> Image {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = center(w, h);
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            img.get(x as u32, y as u32) as f64
        }
    };
    Image::from_fn(img.size(), |u, v| {
        let (sx, sy) = params.source_coord(u as f64, v as f64, cx, cy);
        let (x0, y0) = (sx.floor(), sy.floor());
        let (tx, ty) = (sx - x0, sy - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        let geom = top * (1.0 - ty) + bottom * ty;
        let photo = (geom - CONTRAST_PIVOT) * params.contrast + CONTRAST_PIVOT + params.brightness;
        photo.round().clamp(0.0, 255.0) as u8
    })
}

/// Applies one parameter set. Returns `None` when a lesion leaves the frame
/// entirely. Warped masks are re-split into connected components, so every
/// instance stays a single component with a tight box and a re-expanded box.
pub fn augment_with_params(record: &DatasetRecord, params: &AugmentParams, new_id: String) -> Result<Option<DatasetRecord>> {
    let mut instances = Vec::with_capacity(record.instances.len());
    for inst in &record.instances {
        let warped = warp_mask(&inst.mask, params);
        if warped.is_empty_mask() {
            return Ok(None);
        }
        instances.extend(GtInstance::split_mask(&warped, inst.label)?);
    }
    Ok(Some(DatasetRecord {
        id: new_id,
        label: record.label,
        image: warp_image(&record.image, params),
        instances,
    }))
}

#[derive(Debug, Clone, Default)]
pub struct AugmentOutcome {
    pub records: Vec<DatasetRecord>,
    pub warnings: Vec<String>,
}

/// The original record followed by up to `copies` augmented versions with
/// ids `<id>_aug<c>`.
pub fn augment(record: &DatasetRecord, copies: usize, seed: u64) -> Result<AugmentOutcome> {
    let mut out = AugmentOutcome { records: vec![record.clone()], warnings: Vec::new() };
    for copy in 1..=copies {
        let new_id = format!("{}_aug{copy}", record.id);
        let mut produced = None;
        for attempt in 0..MAX_ATTEMPTS {
            let params = AugmentParams::for_copy(&record.id, copy, attempt, seed);
            if let Some(r) = augment_with_params(record, &params, new_id.clone())? {
                produced = Some(r);
                break;
            }
        }
        match produced {
            Some(r) => out.records.push(r),
            None => out.warnings.push(format!(
                "{new_id}: dropped, a lesion left the frame in all {MAX_ATTEMPTS} attempts"
            )),
        }
    }
    Ok(out)
}

/// [`augment`] over a whole dataset, in parallel; the output order and
/// content do not depend on the thread count.
pub fn augment_all(records: &[DatasetRecord], copies: usize, seed: u64) -> Result<AugmentOutcome> {
    let parts: Vec<AugmentOutcome> = records.par_iter().map(|r| augment(r, copies, seed)).collect::<Result<_>>()?;
    let mut out = AugmentOutcome::default();
    for p in parts {
        out.records.extend(p.records);
        out.warnings.extend(p.warnings);
    }
    Ok(out)
}
