//! Dataset-level evaluation report.
//!
//! Per-image RMSE and Dice are computed on the union of the predicted
//! instance masks against the union of the ground-truth masks; class scores
//! are unweighted means over the images of that class.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::BinaryMask;
use crate::label::ClassLabel;

use super::ap::{DetectionTally, MAP_IOU};
use super::{dice_coefficient, pixel_rmse};

fn fixed6(v: f64) -> Box<RawValue> {
    RawValue::from_string(format!("{v:.6}")).expect("formatted float is valid JSON")
}

fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    fixed6(*v).serialize(s)
}

fn ser_f64_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &fixed6(*v))?;
    }
    map.end()
}

/// Everything [`evaluate`] needs about one image.
#[derive(Debug, Clone)]
pub struct ImageEval {
    pub image_id: String,
    pub label: ClassLabel,
    pub gt_mask: BinaryMask,
    pub gt_boxes: Vec<(BoundingBox, ClassLabel)>,
    pub pred_mask: BinaryMask,
    pub pred_detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image_id: String,
    pub class: ClassLabel,
    #[serde(serialize_with = "ser_f64")]
    pub rmse: f64,
    #[serde(serialize_with = "ser_f64")]
    pub dice: f64,
    /// Every ground-truth lesion was found and no prediction was a false alarm.
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub image_id: String,
    pub label: ClassLabel,
    #[serde(serialize_with = "ser_f64")]
    pub score: f64,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(serialize_with = "ser_f64_map")]
    pub per_class_rmse: BTreeMap<String, f64>,
    #[serde(serialize_with = "ser_f64_map")]
    pub per_class_dice: BTreeMap<String, f64>,
    #[serde(serialize_with = "ser_f64_map")]
    pub per_class_ap_50: BTreeMap<String, f64>,
    #[serde(serialize_with = "ser_f64")]
    pub map_50: f64,
    pub rows: Vec<EvalRow>,
    pub detections: Vec<DetectionRow>,
}

pub fn evaluate(images: &[ImageEval]) -> Result<EvalReport> {
    let mut tally = DetectionTally::new(MAP_IOU);
    let mut rows = Vec::with_capacity(images.len());
    let mut detections = Vec::new();

    for img in images {
        let rmse = pixel_rmse(&img.pred_mask.to_prob(), &img.gt_mask)?;
        let dice = dice_coefficient(&img.pred_mask, &img.gt_mask)?;
        let flags = tally.add_image(&img.pred_detections, &img.gt_boxes);
        let hits = flags.iter().filter(|&&f| f).count();
        rows.push(EvalRow {
            image_id: img.image_id.clone(),
            class: img.label,
            rmse,
            dice,
            matched: hits == img.gt_boxes.len() && hits == flags.len(),
        });
        for (det, hit) in img.pred_detections.iter().zip(flags) {
            detections.push(DetectionRow {
                image_id: img.image_id.clone(),
                label: det.label(),
                score: det.score(),
                true_positive: hit,
            });
        }
    }

    let mut per_class: BTreeMap<ClassLabel, (f64, f64, usize)> = BTreeMap::new();
    for row in &rows {
        let e = per_class.entry(row.class).or_default();
        e.0 += row.rmse;
        e.1 += row.dice;
        e.2 += 1;
    }
    let per_class_rmse = per_class.iter().map(|(k, v)| (k.to_string(), v.0 / v.2 as f64)).collect();
    let per_class_dice = per_class.iter().map(|(k, v)| (k.to_string(), v.1 / v.2 as f64)).collect();
    let per_class_ap_50 = tally.per_class_ap().into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    Ok(EvalReport {
        per_class_rmse,
        per_class_dice,
        per_class_ap_50,
        map_50: tally.mean_ap(),
        rows,
        detections,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-image rows as CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image_id", "class", "rmse", "dice", "matched"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.image_id.clone(),
                r.class.to_string(),
                format!("{:.6}", r.rmse),
                format!("{:.6}", r.dice),
                r.matched.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
