//! Segmenter seam and the built-in reference segmenters.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::DatasetRecord;
use crate::detection::BackendInfo;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{BinaryMask, Image, ProbMask, Resizable, ResizeMethod};
use crate::label::ClassLabel;

/// What a segmenter knows about the crop it is given.
#[derive(Debug, Clone, Copy)]
pub struct RoiContext<'a> {
    pub image_id: &'a str,
    pub k: usize,
    /// Crop box in full-image coordinates.
    pub crop_box: BoundingBox,
    pub label: ClassLabel,
}

/// Semantic segmenter for one class. `segment` returns a probability mask
/// with the crop's shape.
pub trait SegmenterBackend: Send + Sync {
    fn info(&self) -> BackendInfo;

    fn segment(&self, roi: &Image, ctx: &RoiContext) -> Result<ProbMask>;
}

/// Otsu threshold of a 256-bin histogram: the `t` maximizing between-class
/// variance of `{v <= t}` vs `{v > t}` (smallest `t` on ties). `None` when
/// every pixel has the same value.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &n)| v as f64 * n as f64).sum();
    let (mut w0, mut sum0) = (0u64, 0.0f64);
    let mut best: Option<(u8, f64)> = None;
    for (t, &n) in hist.iter().enumerate() {
        w0 += n;
        sum0 += t as f64 * n as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1).powi(2);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

fn histogram(img: &Image) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in img.as_slice() {
        h[v as usize] += 1;
    }
    h
}

/// Global Otsu binarization of the crop. Lesions are darker than tissue on
/// ultrasound, so the darker class is selected by default.
#[derive(Debug, Clone, Copy)]
pub struct OtsuSegmenter {
    pub select_darker: bool,
}

impl Default for OtsuSegmenter {
    fn default() -> Self {
        Self { select_darker: true }
    }
}

impl SegmenterBackend for OtsuSegmenter {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "otsu".into(), input_size: None, concurrent: true }
    }

    fn segment(&self, roi: &Image, _ctx: &RoiContext) -> Result<ProbMask> {
        let Some(t) = otsu_threshold(&histogram(roi)) else {
            return Ok(ProbMask::filled(roi.size(), 0.0));
        };
        let darker = self.select_darker;
        Ok(roi.map(|v| if (v <= t) == darker { 1.0 } else { 0.0 }))
    }
}

/// Marks pixels with `intensity / 255 >= t`.
#[derive(Debug, Clone, Copy)]
pub struct FixedSegmenter {
    pub t: f32,
}

impl SegmenterBackend for FixedSegmenter {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: format!("fixed:{}", self.t), input_size: None, concurrent: true }
    }

    fn segment(&self, roi: &Image, _ctx: &RoiContext) -> Result<ProbMask> {
        let t = self.t;
        Ok(roi.map(|v| if v as f32 / 255.0 >= t { 1.0 } else { 0.0 }))
    }
}

/// Predicts the same probability everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSegmenter {
    value: f32,
}

impl ConstantSegmenter {
    pub fn new(value: f32) -> Self {
        assert!((0.0..=1.0).contains(&value), "probability out of range");
        Self { value }
    }
}

impl SegmenterBackend for ConstantSegmenter {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: format!("constant:{}", self.value), input_size: None, concurrent: true }
    }

    fn segment(&self, roi: &Image, _ctx: &RoiContext) -> Result<ProbMask> {
        Ok(ProbMask::filled(roi.size(), self.value))
    }
}

/// Returns the ground truth under the crop box, resampled (nearest) to the
/// crop's size.
#[derive(Debug, Clone, Default)]
pub struct OracleSegmenter {
    masks: HashMap<String, BinaryMask>,
}

impl OracleSegmenter {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Self {
        Self { masks: records.into_iter().map(|r| (r.id.clone(), r.gt_mask())).collect() }
    }
}

impl SegmenterBackend for OracleSegmenter {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "oracle".into(), input_size: None, concurrent: true }
    }

    fn segment(&self, roi: &Image, ctx: &RoiContext) -> Result<ProbMask> {
        let gt = self
            .masks
            .get(ctx.image_id)
            .ok_or_else(|| Error::backend("oracle", format!("no ground truth for image `{}`", ctx.image_id)))?;
        let crop = gt.crop(&ctx.crop_box)?.resize(roi.size(), ResizeMethod::Nearest)?;
        Ok(crop.to_prob())
    }
}

/// Built-in segmenters selectable by name: `otsu`, `otsu:bright`,
/// `fixed:<t>` or `oracle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    Otsu { select_darker: bool },
    Fixed(f32),
    Oracle,
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "otsu" => Ok(ReferenceKind::Otsu { select_darker: true }),
            "otsu:bright" => Ok(ReferenceKind::Otsu { select_darker: false }),
            "oracle" => Ok(ReferenceKind::Oracle),
            _ => {
                let t = s
                    .strip_prefix("fixed:")
                    .and_then(|t| t.parse::<f32>().ok())
                    .filter(|t| (0.0..=1.0).contains(t))
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown segmenter `{s}`")))?;
                Ok(ReferenceKind::Fixed(t))
            }
        }
    }
}

/// Instantiates a reference segmenter. The oracle reads its ground truth
/// from `records`; the others ignore it.
pub fn reference_segmenter(kind: ReferenceKind, records: &[DatasetRecord]) -> Arc<dyn SegmenterBackend> {
    match kind {
        ReferenceKind::Otsu { select_darker } => Arc::new(OtsuSegmenter { select_darker }),
        ReferenceKind::Fixed(t) => Arc::new(FixedSegmenter { t }),
        ReferenceKind::Oracle => Arc::new(OracleSegmenter::new(records)),
    }
}
