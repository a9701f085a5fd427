//! The `--config` file: pipeline settings, dataset location, backend
//! choices and report formats. Every key is optional; unknown keys are
//! rejected. Command-line flags win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use roiseg::imaging::ResizeMethod;
use roiseg::pipeline::{PipelineConfig, RoiSize};
use roiseg::ClassLabel;

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// One segmenter name for every class, or one per class.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SegmenterChoice {
    All(String),
    PerClass(BTreeMap<ClassLabel, String>),
}

impl SegmenterChoice {
    /// The backend name for each lesion class.
    pub fn per_class(&self) -> CliResult<BTreeMap<ClassLabel, String>> {
        match self {
            SegmenterChoice::All(name) => Ok(ClassLabel::LESIONS.into_iter().map(|l| (l, name.clone())).collect()),
            SegmenterChoice::PerClass(map) => {
                if let Some(l) = ClassLabel::LESIONS.into_iter().find(|l| !map.contains_key(l)) {
                    return Err(Failure::usage(format!("segmenter map has no entry for class {l}")));
                }
                if map.contains_key(&ClassLabel::Normal) {
                    return Err(Failure::usage("segmenter map cannot have an entry for class normal"));
                }
                Ok(map.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub offset_px: Option<u32>,
    pub conf_thresh: Option<f64>,
    pub nms_iou: Option<f64>,
    pub roi_size: Option<RoiSize>,
    pub mask_binarize_thresh: Option<f32>,
    pub resize_method: Option<ResizeMethod>,
    pub seed: Option<u64>,
    /// Dataset root.
    pub data: Option<PathBuf>,
    pub detector: Option<String>,
    pub segmenter: Option<SegmenterChoice>,
    pub out: Option<PathBuf>,
    pub report_formats: Option<Vec<ReportFormat>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(data) = &cfg.data {
            if !data.is_dir() {
                return Err(Failure::usage(format!("config: dataset root {} does not exist", data.display())));
            }
        }
        Ok(cfg)
    }

    /// Pipeline settings from the file over the defaults, validated.
    pub fn pipeline(&self, seed: Option<u64>) -> CliResult<PipelineConfig> {
        let d = PipelineConfig::default();
        let cfg = PipelineConfig {
            offset_px: self.offset_px.unwrap_or(d.offset_px),
            conf_thresh: self.conf_thresh.unwrap_or(d.conf_thresh),
            nms_iou: self.nms_iou.unwrap_or(d.nms_iou),
            roi_size: self.roi_size.unwrap_or(d.roi_size),
            mask_binarize_thresh: self.mask_binarize_thresh.unwrap_or(d.mask_binarize_thresh),
            resize_method: self.resize_method.unwrap_or(d.resize_method),
            seed: seed.or(self.seed).unwrap_or(d.seed),
        };
        cfg.validate().map_err(|e| Failure::usage(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn formats(&self) -> Vec<ReportFormat> {
        let mut f = self.report_formats.clone().unwrap_or_else(|| vec![ReportFormat::Json, ReportFormat::Csv]);
        f.sort();
        f.dedup();
        f
    }
}
