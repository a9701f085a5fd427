//! Instance output: `instances/instances.jsonl` (one line per instance),
//! one 0/255 PNG mask per instance, and `instances/run.json` listing the
//! images that were processed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{read_binary_mask, write_binary_mask};
use crate::label::ClassLabel;

use super::{ImageOutcome, Instance, PipelineConfig, RoiError};

pub const INSTANCES_FILE: &str = "instances/instances.jsonl";
pub const RUN_SUMMARY_FILE: &str = "instances/run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLine {
    pub image_id: String,
    pub k: usize,
    pub label: ClassLabel,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub detection_box: BoundingBox,
    /// Mask path relative to the output directory.
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: PipelineConfig,
    pub images: Vec<String>,
    pub errors: Vec<RoiError>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_instances(out_dir: &Path, outcomes: &[ImageOutcome], cfg: &PipelineConfig) -> Result<RunSummary> {
    let mut lines = String::new();
    for outcome in outcomes {
        for (k, inst) in outcome.instances.iter().enumerate() {
            let mask = format!("instances/{}_{k}.png", outcome.image_id);
            write_binary_mask(&out_dir.join(&mask), &inst.mask)?;
            let line = InstanceLine {
                image_id: outcome.image_id.clone(),
                k,
                label: inst.label,
                score: inst.score,
                bbox: inst.bbox,
                detection_box: inst.detection_box,
                mask,
            };
            lines.push_str(&serde_json::to_string(&line).expect("instance line serializes"));
            lines.push('\n');
        }
    }
    write_text(&out_dir.join(INSTANCES_FILE), &lines)?;

    let summary = RunSummary {
        config: *cfg,
        images: outcomes.iter().map(|o| o.image_id.clone()).collect(),
        errors: outcomes.iter().flat_map(|o| o.errors.iter().cloned()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_text(&out_dir.join(RUN_SUMMARY_FILE), &text)?;
    Ok(summary)
}

/// Reads what [`write_instances`] wrote, grouped by image id.
pub fn read_instances(out_dir: &Path) -> Result<(RunSummary, BTreeMap<String, Vec<Instance>>)> {
    let summary_path = out_dir.join(RUN_SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(|e| Error::json(&summary_path, e))?;

    let path = out_dir.join(INSTANCES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut by_image: BTreeMap<String, Vec<Instance>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let line: InstanceLine = serde_json::from_str(line).map_err(|e| Error::json(&path, e))?;
        let mask = read_binary_mask(&out_dir.join(&line.mask))?;
        by_image.entry(line.image_id).or_default().push(Instance {
            mask,
            label: line.label,
            score: line.score,
            bbox: line.bbox,
            detection_box: line.detection_box,
        });
    }
    Ok((summary, by_image))
}
