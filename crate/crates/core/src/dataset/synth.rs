//! Synthetic ultrasound-like scans with exactly known lesions: smooth
//! ellipses for benign, spiky star polygons for malignant, nothing for
//! normal. Lesions are darker than the speckled background.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::ImageSize;
use crate::imaging::{connected_components, BinaryMask, Image};
use crate::label::ClassLabel;

use super::seed::derive_seed;
use super::{DatasetRecord, GtInstance};

pub const SYNTH_DEFAULT_SIZE: ImageSize = ImageSize::new(128, 128);

const BACKGROUND: f64 = 150.0;
const LESION: f64 = 55.0;
const SPECKLE: f64 = 25.0;

fn ellipse_mask(size: ImageSize, rng: &mut ChaCha8Rng) -> BinaryMask {
    let min_dim = size.width.min(size.height) as f64;
    let a = min_dim * rng.random_range(0.08..0.2);
    let b = min_dim * rng.random_range(0.08..0.2);
    let r = a.max(b);
    let (cx, cy) = lesion_center(size, r, rng);
    let (sin, cos) = rng.random_range(0.0..TAU).sin_cos();
    BinaryMask::from_fn(size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let (u, v) = (cos * dx + sin * dy, -sin * dx + cos * dy);
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
}

fn star_mask(size: ImageSize, rng: &mut ChaCha8Rng) -> BinaryMask {
    let min_dim = size.width.min(size.height) as f64;
    let outer = min_dim * rng.random_range(0.12..0.22);
    let inner = outer * rng.random_range(0.45..0.7);
    let spikes = rng.random_range(7..=12);
    let (cx, cy) = lesion_center(size, outer, rng);
    let phase = rng.random_range(0.0..TAU);
    let verts: Vec<(f64, f64)> = (0..2 * spikes)
        .map(|i| {
            let base = if i % 2 == 0 { outer } else { inner };
            let r = base * rng.random_range(0.85..1.0);
            let t = phase + TAU * i as f64 / (2 * spikes) as f64;
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect();
    BinaryMask::from_fn(size, |x, y| point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &verts))
}

fn point_in_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let ((xi, yi), (xj, yj)) = (verts[i], verts[j]);
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Center keeping a lesion of radius `r`, plus the box offset, inside the frame.
fn lesion_center(size: ImageSize, r: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let margin = r + 8.0;
    let pick = |len: u32, rng: &mut ChaCha8Rng| {
        let (lo, hi) = (margin, len as f64 - margin);
        if lo < hi {
            rng.random_range(lo..hi)
        } else {
            len as f64 / 2.0
        }
    };
    let cx = pick(size.width, rng);
    (cx, pick(size.height, rng))
}

/// Keeps only the largest 8-connected component (first one on ties).
fn largest_component(mask: BinaryMask) -> BinaryMask {
    let mut best: Option<(usize, BinaryMask)> = None;
    for c in connected_components(&mask) {
        let n = c.mask.count_ones();
        if best.as_ref().is_none_or(|(m, _)| n > *m) {
            best = Some((n, c.mask));
        }
    }
    best.map(|(_, m)| m).unwrap_or(mask)
}

fn speckle_image(size: ImageSize, lesion: Option<&BinaryMask>, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(size, |x, y| {
        let base = if lesion.is_some_and(|m| m.get(x, y)) { LESION } else { BACKGROUND };
        let noise = rng.random_range(-SPECKLE..SPECKLE);
        (base + noise).round().clamp(0.0, 255.0) as u8
    })
}

fn generate_one(label: ClassLabel, index: usize, size: ImageSize, seed: u64) -> Result<DatasetRecord> {
    let id = format!("synth_{label}_{index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth", &id, &[]));
    let mask = match label {
        ClassLabel::Benign => Some(largest_component(ellipse_mask(size, &mut rng))),
        ClassLabel::Malignant => Some(largest_component(star_mask(size, &mut rng))),
        ClassLabel::Normal => None,
    };
    let image = speckle_image(size, mask.as_ref(), &mut rng);
    let instances = match mask {
        Some(m) => vec![GtInstance::from_mask(m, label)?
            .ok_or_else(|| Error::InvalidArgument(format!("{id}: image {size} too small for a lesion")))?],
        None => Vec::new(),
    };
    Ok(DatasetRecord { id, label, image, instances })
}

/// `n_per_class` records of each class (benign, malignant, normal, in that
/// order). Deterministic in `seed`.
pub fn synth_generate(n_per_class: usize, size: ImageSize, seed: u64) -> Result<Vec<DatasetRecord>> {
    if size.width < 32 || size.height < 32 {
        return Err(Error::InvalidArgument(format!("synthetic images must be at least 32x32, got {size}")));
    }
    let mut out = Vec::with_capacity(3 * n_per_class);
    for label in ClassLabel::ALL {
        for i in 0..n_per_class {
            out.push(generate_one(label, i, size, seed)?);
        }
    }
    Ok(out)
}
