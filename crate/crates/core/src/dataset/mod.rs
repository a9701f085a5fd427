//! Dataset handling: records with ground-truth instances, ingestion of the
//! class-folder layout, holdout and k-fold splits, augmentation and a
//! synthetic generator.

mod augment;
mod ingest;
mod seed;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{expand_box, BoundingBox, ImageSize};
use crate::imaging::{connected_components, BinaryMask, Image};
use crate::label::ClassLabel;

pub use augment::{augment, augment_all, augment_with_params, AugmentOutcome, AugmentParams, DEFAULT_COPIES};
pub use ingest::{ingest, write_dataset, Ingested, LoadIssue, LoadReport};
pub use seed::derive_seed;
pub use split::{
    kfold_stratified, make_split, split_holdout, FoldSplit, HoldoutRatios, HoldoutSplit, DEFAULT_FOLDS,
};
pub use synth::{synth_generate, SYNTH_DEFAULT_SIZE};

/// Pixels added to each ground-truth box's width and height.
pub const BOX_OFFSET: u32 = 10;

/// One ground-truth lesion.
#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    /// Full-image mask of this lesion only.
    pub mask: BinaryMask,
    /// Minimal box around the mask.
    pub tight: BoundingBox,
    /// `tight` grown by [`BOX_OFFSET`] and clipped to the image.
    pub expanded: BoundingBox,
    pub label: ClassLabel,
}

impl GtInstance {
    /// Builds an instance from a single-lesion mask; `None` if the mask is empty.
    pub fn from_mask(mask: BinaryMask, label: ClassLabel) -> Result<Option<Self>> {
        let Some(tight) = crate::imaging::tight_box(&mask) else {
            return Ok(None);
        };
        let expanded = expand_box(&tight, BOX_OFFSET, mask.size())?;
        Ok(Some(Self { mask, tight, expanded, label }))
    }

    /// One instance per 8-connected component of `mask`.
    pub fn split_mask(mask: &BinaryMask, label: ClassLabel) -> Result<Vec<Self>> {
        connected_components(mask)
            .into_iter()
            .map(|c| {
                let expanded = expand_box(&c.bbox, BOX_OFFSET, mask.size())?;
                Ok(Self { mask: c.mask, tight: c.bbox, expanded, label })
            })
            .collect()
    }
}

/// One scan with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub label: ClassLabel,
    pub image: Image,
    pub instances: Vec<GtInstance>,
}

impl DatasetRecord {
    pub fn size(&self) -> ImageSize {
        self.image.size()
    }

    /// Union of all instance masks.
    pub fn gt_mask(&self) -> BinaryMask {
        let mut acc = BinaryMask::filled(self.size(), false);
        for inst in &self.instances {
            acc = acc.union(&inst.mask).expect("instance masks share the image shape");
        }
        acc
    }

    /// Expanded boxes and classes, the targets detections are scored against.
    pub fn gt_boxes(&self) -> Vec<(BoundingBox, ClassLabel)> {
        self.instances.iter().map(|i| (i.expanded, i.label)).collect()
    }
}

/// Id and class of each record, the input the splitters work on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitItem {
    pub id: String,
    pub label: ClassLabel,
}

impl From<&DatasetRecord> for SplitItem {
    fn from(r: &DatasetRecord) -> Self {
        Self { id: r.id.clone(), label: r.label }
    }
}
