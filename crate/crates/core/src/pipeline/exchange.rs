//! File exchange with out-of-process segmenters.
//!
//! ```text
//! <dir>/manifest.json          [{"roi": "rois/<image_id>_<k>.png", "image_id", "k",
//!                                "label", "box", "score", "detection_box"}, ...]
//! <dir>/rois/<image_id>_<k>.png    8-bit gray crop, already resized
//! <dir>/masks/<image_id>_<k>.png   8-bit gray answer, prob = v / 255, same size
//! ```
//!
//! `box` is the crop box in image coordinates; `detection_box` is the
//! suppressed detection it was grown from.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageSize};
use crate::imaging::{read_prob_mask8, write_gray, ProbMask};
use crate::label::ClassLabel;

use super::{assemble, sort_instances, ImageOutcome, PipelineConfig, RoiError, RoiJob, RoiSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
const ROI_DIR: &str = "rois";
const MASK_DIR: &str = "masks";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub roi: String,
    pub image_id: String,
    pub k: usize,
    pub label: ClassLabel,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
    pub detection_box: BoundingBox,
}

impl ManifestEntry {
    fn file_name(&self) -> &str {
        self.roi.rsplit('/').next().unwrap_or(&self.roi)
    }

    pub fn mask_path(&self) -> String {
        format!("{MASK_DIR}/{}", self.file_name())
    }
}

/// Per-entry failure while reading answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub index: usize,
    pub mask: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct MaskBatch {
    /// Manifest index and its mask, for every entry that loaded.
    pub masks: Vec<(usize, ProbMask)>,
    pub errors: Vec<EntryError>,
}

/// The manifest describing `jobs`.
pub fn manifest_for(jobs: &[RoiJob]) -> Vec<ManifestEntry> {
    jobs.iter()
        .map(|job| {
            let spec = &job.spec;
            ManifestEntry {
                roi: format!("{ROI_DIR}/{}_{}.png", spec.image_id, spec.k),
                image_id: spec.image_id.clone(),
                k: spec.k,
                label: spec.detection.label(),
                bbox: spec.crop_box,
                score: spec.detection.score(),
                detection_box: *spec.detection.bbox(),
            }
        })
        .collect()
}

/// Writes the crops and the manifest; returns the manifest.
pub fn write_roi_batch(jobs: &[RoiJob], out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let manifest = manifest_for(jobs);
    for (job, entry) in jobs.iter().zip(&manifest) {
        write_gray(&out_dir.join(&entry.roi), &job.roi)?;
    }
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
}

/// Loads the answer for every manifest entry.
///
/// A missing, unreadable or wrongly sized mask is an entry error. A missing
/// `masks/` directory, or mask files no entry asked for, fail the batch.
pub fn read_mask_batch(dir: &Path, manifest: &[ManifestEntry]) -> Result<MaskBatch> {
    let mask_dir = dir.join(MASK_DIR);
    if !mask_dir.is_dir() {
        return Err(Error::Protocol(format!("{MASK_DIR}/ directory missing in exchange directory")));
    }
    let expected: HashSet<String> = manifest.iter().map(|e| e.file_name().to_string()).collect();
    let mut strays: Vec<String> = Vec::new();
    for entry in fs::read_dir(&mask_dir).map_err(|e| Error::io(&mask_dir, e))? {
        let name = entry.map_err(|e| Error::io(&mask_dir, e))?.file_name().to_string_lossy().into_owned();
        if name.ends_with(".png") && !expected.contains(&name) {
            strays.push(name);
        }
    }
    if !strays.is_empty() {
        strays.sort();
        return Err(Error::Protocol(format!("masks not listed in the manifest: {}", strays.join(", "))));
    }

    let mut batch = MaskBatch::default();
    for (index, entry) in manifest.iter().enumerate() {
        let rel = entry.mask_path();
        let fail = |message: String| EntryError { index, mask: rel.clone(), message };
        let roi_size = match image::image_dimensions(dir.join(&entry.roi)) {
            Ok((w, h)) => ImageSize::new(w, h),
            Err(e) => {
                batch.errors.push(fail(format!("cannot read roi {}: {e}", entry.roi)));
                continue;
            }
        };
        let path = dir.join(&rel);
        if !path.is_file() {
            batch.errors.push(fail("mask file missing".into()));
            continue;
        }
        match read_prob_mask8(&path) {
            Ok(m) if m.size() == roi_size => batch.masks.push((index, m)),
            Ok(m) => batch.errors.push(fail(format!("mask is {} but roi is {roi_size}", m.size()))),
            Err(e) => batch.errors.push(fail(e.to_string())),
        }
    }
    Ok(batch)
}

/// Pastes a batch of answers back into per-image outcomes. `image_sizes`
/// must cover every image in the manifest; images listed there but absent
/// from the manifest yield empty outcomes.
pub fn assemble_batch(
    manifest: &[ManifestEntry],
    batch: &MaskBatch,
    image_sizes: &BTreeMap<String, ImageSize>,
    cfg: &PipelineConfig,
) -> Result<Vec<ImageOutcome>> {
    let mut outcomes: BTreeMap<&str, ImageOutcome> = image_sizes
        .keys()
        .map(|id| (id.as_str(), ImageOutcome { image_id: id.clone(), ..Default::default() }))
        .collect();
    let mut answers: BTreeMap<usize, &ProbMask> = batch.masks.iter().map(|(i, m)| (*i, m)).collect();

    for (index, entry) in manifest.iter().enumerate() {
        let outcome = outcomes
            .get_mut(entry.image_id.as_str())
            .ok_or_else(|| Error::Protocol(format!("manifest references unknown image `{}`", entry.image_id)))?;
        let Some(pred) = answers.remove(&index) else {
            let msg = batch
                .errors
                .iter()
                .find(|e| e.index == index)
                .map_or_else(|| "no mask".to_string(), |e| e.message.clone());
            outcome.errors.push(RoiError { image_id: entry.image_id.clone(), k: Some(entry.k), message: msg });
            continue;
        };
        let spec = RoiSpec {
            image_id: entry.image_id.clone(),
            k: entry.k,
            image_size: image_sizes[&entry.image_id],
            detection: Detection::new(entry.detection_box, entry.label, entry.score)?,
            crop_box: entry.bbox,
            roi_size: pred.size(),
        };
        match assemble(&spec, pred, cfg) {
            Ok(Some(inst)) => outcome.instances.push(inst),
            Ok(None) => {}
            Err(e) => outcome.errors.push(RoiError {
                image_id: entry.image_id.clone(),
                k: Some(entry.k),
                message: e.to_string(),
            }),
        }
    }
    let mut out: Vec<ImageOutcome> = outcomes.into_values().collect();
    for o in &mut out {
        sort_instances(&mut o.instances);
    }
    Ok(out)
}
