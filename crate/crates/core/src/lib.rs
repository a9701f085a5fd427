//! Instance segmentation assembled from an object detector and one semantic
//! segmenter per lesion class.
//!
//! The pipeline detects lesions, suppresses duplicate boxes, crops each
//! detection (expanded by a fixed pixel offset), resizes the crop for the
//! class-specific segmenter, then pastes the prediction back into the full
//! image and clears everything outside the detection box.
//!
//! Around the pipeline sit the dataset tools (mask ingestion, box extraction,
//! stratified splits, augmentation, a synthetic generator) and the evaluation
//! metrics (Dice loss, Dice coefficient, pixel RMSE, AP/mAP).

pub mod dataset;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod label;
pub mod metrics;
pub mod pipeline;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, ImageSize, Point};
pub use label::ClassLabel;
