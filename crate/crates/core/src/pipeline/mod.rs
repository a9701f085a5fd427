//! The instance segmenter: detect, suppress duplicates, crop each detection
//! (expanded by the box offset), resize the crop for the segmenter of the
//! detected class, resize the prediction back, paste it into the full image,
//! binarize, and clear everything outside the crop box.

mod exchange;
mod output;
mod segmenter;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::BOX_OFFSET;
use crate::detection::{nms, Detection, DetectorBackend, NmsParams, DEFAULT_CONF_THRESH, DEFAULT_NMS_IOU};
use crate::error::{Error, Result};
use crate::geometry::{clip_box, expand_box, BoundingBox, ImageSize};
use crate::imaging::{threshold, BinaryMask, Image, ProbMask, Resizable, ResizeMethod};
use crate::label::ClassLabel;

pub use exchange::{
    assemble_batch, manifest_for, read_manifest, read_mask_batch, write_roi_batch, EntryError, ManifestEntry, MaskBatch,
    MANIFEST_FILE,
};
pub use output::{read_instances, write_instances, InstanceLine, RunSummary, INSTANCES_FILE, RUN_SUMMARY_FILE};
pub use segmenter::{
    otsu_threshold, reference_segmenter, ConstantSegmenter, FixedSegmenter, OracleSegmenter, OtsuSegmenter,
    ReferenceKind, RoiContext, SegmenterBackend,
};

/// Size of the crops handed to the segmenters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoiSize {
    /// Crops keep the crop box's own size (no resizing).
    Native,
    Fixed(ImageSize),
}

impl RoiSize {
    pub fn for_box(self, bbox: &BoundingBox) -> ImageSize {
        match self {
            RoiSize::Native => bbox.size(),
            RoiSize::Fixed(s) => s,
        }
    }
}

impl Default for RoiSize {
    fn default() -> Self {
        RoiSize::Fixed(ImageSize::new(256, 256))
    }
}

impl fmt::Display for RoiSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoiSize::Native => f.write_str("native"),
            RoiSize::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for RoiSize {
    type Err = Error;

    /// `native` or `<width>x<height>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "native" {
            return Ok(RoiSize::Native);
        }
        let bad = || Error::InvalidArgument(format!("roi size must be `native` or WxH, got `{s}`"));
        let (w, h) = s.split_once('x').ok_or_else(bad)?;
        let (w, h): (u32, u32) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
        if w == 0 || h == 0 {
            return Err(bad());
        }
        Ok(RoiSize::Fixed(ImageSize::new(w, h)))
    }
}

impl Serialize for RoiSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RoiSize::Native => s.serialize_str("native"),
            RoiSize::Fixed(size) => size.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for RoiSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Size(ImageSize),
        }
        match Repr::deserialize(d)? {
            Repr::Name(n) => n.parse().map_err(serde::de::Error::custom),
            Repr::Size(s) if s.width > 0 && s.height > 0 => Ok(RoiSize::Fixed(s)),
            Repr::Size(s) => Err(serde::de::Error::custom(format!("empty roi size {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Growth applied to each detection box before cropping; must be even.
    pub offset_px: u32,
    pub conf_thresh: f64,
    pub nms_iou: f64,
    pub roi_size: RoiSize,
    pub mask_binarize_thresh: f32,
    pub resize_method: ResizeMethod,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            offset_px: BOX_OFFSET,
            conf_thresh: DEFAULT_CONF_THRESH,
            nms_iou: DEFAULT_NMS_IOU,
            roi_size: RoiSize::default(),
            mask_binarize_thresh: 0.5,
            resize_method: ResizeMethod::Bicubic,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("conf_thresh", self.conf_thresh)?;
        unit("nms_iou", self.nms_iou)?;
        unit("mask_binarize_thresh", self.mask_binarize_thresh as f64)?;
        if !self.offset_px.is_multiple_of(2) {
            return Err(Error::OddOffset(self.offset_px));
        }
        Ok(())
    }

    pub fn nms_params(&self) -> NmsParams {
        NmsParams { conf_thresh: self.conf_thresh, iou_thresh: self.nms_iou }
    }
}

/// A segmented lesion in full-image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Full-image mask; zero outside `bbox`.
    pub mask: BinaryMask,
    pub label: ClassLabel,
    pub score: f64,
    /// Crop box the mask was predicted in (expanded and clipped detection).
    pub bbox: BoundingBox,
    /// Detection box as reported after suppression, before expansion.
    pub detection_box: BoundingBox,
}

impl Instance {
    pub fn detection(&self) -> Detection {
        Detection::new(self.detection_box, self.label, self.score).expect("instances carry lesion labels")
    }
}

/// Where one crop came from; enough to paste a prediction back.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSpec {
    pub image_id: String,
    /// Index of the detection among the image's post-suppression detections.
    pub k: usize,
    pub image_size: ImageSize,
    pub detection: Detection,
    pub crop_box: BoundingBox,
    pub roi_size: ImageSize,
}

/// A crop ready for its segmenter.
#[derive(Debug, Clone)]
pub struct RoiJob {
    pub spec: RoiSpec,
    pub roi: Image,
}

/// A detection that could not be turned into an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiError {
    pub image_id: String,
    /// `None` when the failure concerns the whole image (detector error).
    pub k: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ImageOutcome {
    pub image_id: String,
    pub instances: Vec<Instance>,
    pub errors: Vec<RoiError>,
}

pub type Segmenters = BTreeMap<ClassLabel, Arc<dyn SegmenterBackend>>;

/// Clips raw detections to the image, dropping (and reporting) boxes that
/// fall completely outside.
pub fn clip_detections(image_id: &str, size: ImageSize, dets: Vec<Detection>) -> (Vec<Detection>, Vec<RoiError>) {
    let mut kept = Vec::with_capacity(dets.len());
    let mut errors = Vec::new();
    for d in dets {
        match clip_box(d.bbox(), size) {
            Ok(b) => kept.push(d.with_box(b)),
            Err(e) => errors.push(RoiError { image_id: image_id.into(), k: None, message: e.to_string() }),
        }
    }
    (kept, errors)
}

/// Suppresses duplicates and cuts one resized crop per surviving detection.
pub fn plan_rois(image_id: &str, image: &Image, detections: &[Detection], cfg: &PipelineConfig) -> Result<Vec<RoiJob>> {
    nms(detections, cfg.nms_params())
        .into_iter()
        .enumerate()
        .map(|(k, det)| {
            let crop_box = expand_box(det.bbox(), cfg.offset_px, image.size())?;
            let roi_size = cfg.roi_size.for_box(&crop_box);
            let roi = image.crop(&crop_box)?.resize(roi_size, cfg.resize_method)?;
            let spec = RoiSpec {
                image_id: image_id.to_string(),
                k,
                image_size: image.size(),
                detection: det,
                crop_box,
                roi_size,
            };
            Ok(RoiJob { spec, roi })
        })
        .collect()
}

/// Turns a segmenter output for `spec` into an instance; `None` when the
/// binarized mask is empty.
pub fn assemble(spec: &RoiSpec, prediction: &ProbMask, cfg: &PipelineConfig) -> Result<Option<Instance>> {
    if prediction.size() != spec.roi_size {
        return Err(Error::ShapeMismatch { expected: spec.roi_size, actual: prediction.size() });
    }
    let patch = prediction.resize(spec.crop_box.size(), cfg.resize_method)?;
    let canvas = ProbMask::filled(spec.image_size, 0.0).paste(&patch, &spec.crop_box)?;
    let mask = threshold(&canvas, cfg.mask_binarize_thresh).restrict_to(&spec.crop_box);
    if mask.is_empty_mask() {
        return Ok(None);
    }
    Ok(Some(Instance {
        mask,
        label: spec.detection.label(),
        score: spec.detection.score(),
        bbox: spec.crop_box,
        detection_box: *spec.detection.bbox(),
    }))
}

/// Output order: score descending, then crop box x, then y.
pub fn sort_instances(instances: &mut [Instance]) {
    instances.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.bbox.x().cmp(&b.bbox.x()))
            .then(a.bbox.y().cmp(&b.bbox.y()))
    });
}

fn segment_job(job: &RoiJob, segmenters: &Segmenters, cfg: &PipelineConfig) -> Result<Option<Instance>> {
    let label = job.spec.detection.label();
    let seg = segmenters
        .get(&label)
        .ok_or_else(|| Error::backend("pipeline", format!("no segmenter registered for class {label}")))?;
    let ctx = RoiContext { image_id: &job.spec.image_id, k: job.spec.k, crop_box: job.spec.crop_box, label };
    let pred = seg.segment(&job.roi, &ctx)?;
    assemble(&job.spec, &pred, cfg)
}

/// Runs the full pipeline on one image. Failures of individual detections
/// are recorded in the outcome and do not affect the others.
pub fn run_image(
    image_id: &str,
    image: &Image,
    detector: &dyn DetectorBackend,
    segmenters: &Segmenters,
    cfg: &PipelineConfig,
) -> Result<ImageOutcome> {
    cfg.validate()?;
    let mut outcome = ImageOutcome { image_id: image_id.to_string(), ..Default::default() };
    let raw = match detector.detect(image_id, image) {
        Ok(d) => d,
        Err(e) => {
            outcome.errors.push(RoiError { image_id: image_id.into(), k: None, message: e.to_string() });
            return Ok(outcome);
        }
    };
    let (dets, clip_errors) = clip_detections(image_id, image.size(), raw);
    outcome.errors.extend(clip_errors);
    let jobs = plan_rois(image_id, image, &dets, cfg)?;

    let concurrent = segmenters.values().all(|s| s.info().concurrent);
    let results: Vec<Result<Option<Instance>>> = if concurrent {
        jobs.par_iter().map(|j| segment_job(j, segmenters, cfg)).collect()
    } else {
        jobs.iter().map(|j| segment_job(j, segmenters, cfg)).collect()
    };
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(Some(inst)) => outcome.instances.push(inst),
            Ok(None) => {}
            Err(e) => outcome.errors.push(RoiError {
                image_id: image_id.into(),
                k: Some(job.spec.k),
                message: e.to_string(),
            }),
        }
    }
    sort_instances(&mut outcome.instances);
    Ok(outcome)
}

/// [`run_image`] over many images, in input order.
pub fn run_images<'a>(
    images: &[(&'a str, &'a Image)],
    detector: &dyn DetectorBackend,
    segmenters: &Segmenters,
    cfg: &PipelineConfig,
) -> Result<Vec<ImageOutcome>> {
    if detector.info().concurrent {
        images.par_iter().map(|(id, img)| run_image(id, img, detector, segmenters, cfg)).collect()
    } else {
        images.iter().map(|(id, img)| run_image(id, img, detector, segmenters, cfg)).collect()
    }
}
