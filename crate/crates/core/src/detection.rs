//! Detector output, non-maximum suppression and detector backends.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox, ImageSize};
use crate::imaging::Image;
use crate::label::ClassLabel;

/// Default minimum confidence kept by [`nms`].
pub const DEFAULT_CONF_THRESH: f64 = 0.6;
/// Default IoU above which a lower-scored box is suppressed.
pub const DEFAULT_NMS_IOU: f64 = 0.4;

#[derive(Deserialize)]
struct RawDetection {
    #[serde(rename = "box")]
    bbox: BoundingBox,
    label: ClassLabel,
    score: f64,
}

/// A scored, labelled lesion box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct Detection {
    #[serde(rename = "box")]
    bbox: BoundingBox,
    label: ClassLabel,
    score: f64,
}

impl TryFrom<RawDetection> for Detection {
    type Error = Error;

    fn try_from(raw: RawDetection) -> Result<Self> {
        Detection::new(raw.bbox, raw.label, raw.score)
    }
}

impl Detection {
    pub fn new(bbox: BoundingBox, label: ClassLabel, score: f64) -> Result<Self> {
        if !label.is_lesion() {
            return Err(Error::InvalidArgument("detections cannot carry the normal label".into()));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!("detection score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, label, score })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn with_box(self, bbox: BoundingBox) -> Self {
        Self { bbox, ..self }
    }
}

/// Keep-priority: higher score first, then smaller x, then smaller y.
pub fn priority_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.x().cmp(&b.bbox.x()))
        .then(a.bbox.y().cmp(&b.bbox.y()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsParams {
    pub conf_thresh: f64,
    pub iou_thresh: f64,
}

impl Default for NmsParams {
    fn default() -> Self {
        Self { conf_thresh: DEFAULT_CONF_THRESH, iou_thresh: DEFAULT_NMS_IOU }
    }
}

/// Greedy class-agnostic non-maximum suppression.
///
/// Detections scoring below `conf_thresh` are dropped. The survivors are
/// visited in [`priority_order`] (input order breaks remaining ties); each one
/// is kept unless its IoU with an already kept box is strictly greater than
/// `iou_thresh`.
pub fn nms(dets: &[Detection], params: NmsParams) -> Vec<Detection> {
    let mut candidates: Vec<Detection> =
        dets.iter().filter(|d| d.score >= params.conf_thresh).copied().collect();
    candidates.sort_by(priority_order);

    let mut kept: Vec<Detection> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if kept.iter().all(|k| iou(&k.bbox, &cand.bbox) <= params.iou_thresh) {
            kept.push(cand);
        }
    }
    kept
}

/// Ground-truth detections for a record: one per instance, on its expanded
/// box and true class.
pub fn oracle_detect(record: &DatasetRecord, score: f64) -> Vec<Detection> {
    record
        .instances
        .iter()
        .map(|inst| Detection::new(inst.expanded, inst.label, score).expect("ground truth is a lesion"))
        .collect()
}

/// Describes a backend to the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendInfo {
    pub name: String,
    /// Input resolution the backend expects, if it has a fixed one.
    pub input_size: Option<ImageSize>,
    /// Whether `detect`/`segment` may be called from several threads at once.
    pub concurrent: bool,
}

/// Object detector seam. Real detectors run out of process and hand their
/// results over as JSON lines (see [`FileDetector`]).
pub trait DetectorBackend: Send + Sync {
    fn info(&self) -> BackendInfo;

    fn detect(&self, image_id: &str, image: &Image) -> Result<Vec<Detection>>;
}

/// Detector that replays the ground truth of a dataset.
#[derive(Debug, Clone, Default)]
pub struct OracleDetector {
    by_image: HashMap<String, Vec<Detection>>,
}

impl OracleDetector {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>, score: f64) -> Self {
        let by_image = records.into_iter().map(|r| (r.id.clone(), oracle_detect(r, score))).collect();
        Self { by_image }
    }
}

impl DetectorBackend for OracleDetector {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "oracle".into(), input_size: None, concurrent: true }
    }

    fn detect(&self, image_id: &str, _image: &Image) -> Result<Vec<Detection>> {
        self.by_image
            .get(image_id)
            .cloned()
            .ok_or_else(|| Error::backend("oracle", format!("no ground truth for image `{image_id}`")))
    }
}

/// One line of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLine {
    pub image_id: String,
    #[serde(flatten)]
    pub detection: Detection,
}

pub fn write_detections_jsonl(path: &Path, lines: &[DetectionLine]) -> Result<()> {
    let mut text = String::new();
    for line in lines {
        text.push_str(&serde_json::to_string(line).map_err(|e| Error::json(path, e))?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_detections_jsonl(path: &Path) -> Result<Vec<DetectionLine>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path, e)))
        .collect()
}

/// Detector backed by a precomputed JSON-lines file, e.g. the output of an
/// external detector run.
#[derive(Debug, Clone, Default)]
pub struct FileDetector {
    by_image: HashMap<String, Vec<Detection>>,
}

impl FileDetector {
    pub fn from_lines(lines: Vec<DetectionLine>) -> Self {
        let mut by_image: HashMap<String, Vec<Detection>> = HashMap::new();
        for line in lines {
            by_image.entry(line.image_id).or_default().push(line.detection);
        }
        Self { by_image }
    }

    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::from_lines(read_detections_jsonl(path)?))
    }
}

impl DetectorBackend for FileDetector {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "file".into(), input_size: None, concurrent: true }
    }

    /// Images absent from the file have no detections.
    fn detect(&self, image_id: &str, _image: &Image) -> Result<Vec<Detection>> {
        Ok(self.by_image.get(image_id).cloned().unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: i32, y: i32, w: u32, h: u32, score: f64) -> Detection {
        Detection::new(BoundingBox::new(x, y, w, h).unwrap(), ClassLabel::Benign, score).unwrap()
    }

    #[test]
    fn empty_input() {
        assert!(nms(&[], NmsParams::default()).is_empty());
    }

    #[test]
    fn duplicate_suppressed() {
        let out = nms(&[det(0, 0, 10, 10, 0.8), det(0, 0, 10, 10, 0.9)], NmsParams::default());
        assert_eq!(out, vec![det(0, 0, 10, 10, 0.9)]);
    }

    #[test]
    fn below_confidence_dropped() {
        assert!(nms(&[det(0, 0, 10, 10, 0.55)], NmsParams::default()).is_empty());
        assert_eq!(nms(&[det(0, 0, 10, 10, 0.6)], NmsParams::default()).len(), 1);
    }

    #[test]
    fn suppression_is_class_agnostic() {
        let b = Detection::new(BoundingBox::new(1, 0, 10, 10).unwrap(), ClassLabel::Malignant, 0.7).unwrap();
        let out = nms(&[b, det(0, 0, 10, 10, 0.9)], NmsParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label(), ClassLabel::Benign);
    }

    #[test]
    fn iou_exactly_at_threshold_is_kept() {
        // 7x1 boxes overlapping in 4 columns: 4 / (7 + 7 - 4) = 0.4
        let a = det(0, 0, 7, 1, 0.9);
        let b = det(3, 0, 7, 1, 0.8);
        assert!((iou(a.bbox(), b.bbox()) - 0.4).abs() < 1e-15);
        assert_eq!(nms(&[a, b], NmsParams::default()).len(), 2);
    }

    #[test]
    fn ties_broken_by_position() {
        let out = nms(&[det(5, 0, 10, 10, 0.9), det(4, 0, 10, 10, 0.9)], NmsParams::default());
        assert_eq!(out, vec![det(4, 0, 10, 10, 0.9)]);
    }

    #[test]
    fn invalid_detections_rejected() {
        let b = BoundingBox::new(0, 0, 1, 1).unwrap();
        assert!(Detection::new(b, ClassLabel::Normal, 0.9).is_err());
        assert!(Detection::new(b, ClassLabel::Benign, 1.2).is_err());
        assert!(serde_json::from_str::<Detection>(r#"{"box":{"x":0,"y":0,"w":1,"h":1},"label":"normal","score":0.5}"#).is_err());
    }

    #[test]
    fn detection_line_format() {
        let line = DetectionLine { image_id: "img1".into(), detection: det(1, 2, 3, 4, 0.75) };
        let text = serde_json::to_string(&line).unwrap();
        assert_eq!(text, r#"{"image_id":"img1","box":{"x":1,"y":2,"w":3,"h":4},"label":"benign","score":0.75}"#);
        let back: DetectionLine = serde_json::from_str(&text).unwrap();
        assert_eq!(back, line);
    }
}
