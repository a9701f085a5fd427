//! Detection matching and average precision.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::detection::Detection;
use crate::geometry::{iou, BoundingBox};
use crate::label::ClassLabel;

/// IoU at which a detection counts as a hit for mAP.
pub const MAP_IOU: f64 = 0.5;

/// One operating point of a precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PRPoint {
    pub precision: f64,
    pub recall: f64,
    pub score_threshold: f64,
}

/// Greedy matching of predictions to ground truth boxes.
///
/// Predictions are visited by descending score (input order on ties). Each
/// one claims the unmatched ground truth box of its class with the highest
/// IoU, provided that IoU is at least `iou_thresh`. Returns the true-positive
/// flag of every prediction, in input order.
pub fn match_detections(preds: &[Detection], gts: &[(BoundingBox, ClassLabel)], iou_thresh: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score().total_cmp(&preds[a].score()));

    let mut taken = vec![false; gts.len()];
    let mut flags = vec![false; preds.len()];
    for i in order {
        let pred = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, (gt_box, gt_label)) in gts.iter().enumerate() {
            if taken[j] || *gt_label != pred.label() {
                continue;
            }
            let overlap = iou(pred.bbox(), gt_box);
            if overlap >= iou_thresh && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((j, overlap));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
            flags[i] = true;
        }
    }
    flags
}

/// Precision/recall after each distinct score threshold, highest first.
///
/// Predictions with equal scores enter the curve together.
pub fn precision_recall_curve(scored: &[(f64, bool)], n_gt: usize) -> Vec<PRPoint> {
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(score, hit)) in sorted.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = sorted.get(i + 1).is_none_or(|next| next.0 != score);
        if group_ends {
            points.push(PRPoint {
                precision: tp as f64 / (tp + fp) as f64,
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                score_threshold: score,
            });
        }
    }
    points
}

/// All-point interpolated average precision: the area under the precision
/// envelope (running maximum from the right) of the PR curve.
///
/// Returns 0 when there is no ground truth.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let curve = precision_recall_curve(scored, n_gt);
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (point, prec) in curve.iter().zip(envelope) {
        ap += (point.recall - prev_recall) * prec;
        prev_recall = point.recall;
    }
    ap
}

/// Scored predictions and ground-truth count for one class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassTally {
    pub scored: Vec<(f64, bool)>,
    pub n_gt: usize,
}

/// Accumulates matched detections over a dataset, per class.
#[derive(Debug, Clone, Default)]
pub struct DetectionTally {
    iou_thresh: f64,
    classes: BTreeMap<ClassLabel, ClassTally>,
}

impl DetectionTally {
    pub fn new(iou_thresh: f64) -> Self {
        Self { iou_thresh, classes: BTreeMap::new() }
    }

    /// Matches one image's predictions and returns their TP flags.
    pub fn add_image(&mut self, preds: &[Detection], gts: &[(BoundingBox, ClassLabel)]) -> Vec<bool> {
        let flags = match_detections(preds, gts, self.iou_thresh);
        for (pred, &hit) in preds.iter().zip(&flags) {
            self.classes.entry(pred.label()).or_default().scored.push((pred.score(), hit));
        }
        for (_, label) in gts {
            self.classes.entry(*label).or_default().n_gt += 1;
        }
        flags
    }

    pub fn classes(&self) -> &BTreeMap<ClassLabel, ClassTally> {
        &self.classes
    }

    pub fn per_class_ap(&self) -> BTreeMap<ClassLabel, f64> {
        self.classes
            .iter()
            .filter(|(_, t)| t.n_gt > 0)
            .map(|(&label, t)| (label, average_precision(&t.scored, t.n_gt)))
            .collect()
    }

    pub fn mean_ap(&self) -> f64 {
        mean_average_precision(&self.classes)
    }
}

/// Unweighted mean of per-class AP over classes that have ground truth.
///
/// With no ground truth anywhere, the result is 1.0 if there are also no
/// predictions and 0.0 otherwise.
pub fn mean_average_precision(classes: &BTreeMap<ClassLabel, ClassTally>) -> f64 {
    let aps: Vec<f64> = classes
        .values()
        .filter(|t| t.n_gt > 0)
        .map(|t| average_precision(&t.scored, t.n_gt))
        .collect();
    if aps.is_empty() {
        let any_pred = classes.values().any(|t| !t.scored.is_empty());
        return if any_pred { 0.0 } else { 1.0 };
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: i32, label: ClassLabel, score: f64) -> Detection {
        Detection::new(BoundingBox::new(x, 0, 10, 10).unwrap(), label, score).unwrap()
    }

    fn gt(x: i32, label: ClassLabel) -> (BoundingBox, ClassLabel) {
        (BoundingBox::new(x, 0, 10, 10).unwrap(), label)
    }

    use ClassLabel::{Benign, Malignant};

    #[test]
    fn exact_hit_is_tp() {
        assert_eq!(match_detections(&[det(0, Benign, 0.9)], &[gt(0, Benign)], 0.5), vec![true]);
    }

    #[test]
    fn duplicate_is_fp() {
        let flags = match_detections(&[det(0, Benign, 0.7), det(0, Benign, 0.9)], &[gt(0, Benign)], 0.5);
        assert_eq!(flags, vec![false, true]);
    }

    #[test]
    fn below_threshold_is_fp() {
        // x offset 4 on 10x10 boxes: 60 / 140 ~= 0.43 < 0.5
        assert_eq!(match_detections(&[det(4, Benign, 0.9)], &[gt(0, Benign)], 0.5), vec![false]);
    }

    #[test]
    fn class_must_agree() {
        assert_eq!(match_detections(&[det(0, Malignant, 0.9)], &[gt(0, Benign)], 0.5), vec![false]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[(0.9, true)], 1), 1.0);
        assert_eq!(average_precision(&[(0.9, true), (0.8, false)], 1), 1.0);
        assert_eq!(average_precision(&[(0.9, false), (0.8, true)], 1), 0.5);
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[(0.9, false)], 0), 0.0);
    }

    #[test]
    fn tied_scores_enter_together() {
        // both at one threshold: precision 1/2 at recall 1
        assert_eq!(average_precision(&[(0.8, true), (0.8, false)], 1), 0.5);
        assert_eq!(average_precision(&[(0.8, false), (0.8, true)], 1), 0.5);
    }

    #[test]
    fn map_conventions() {
        let mut tally = DetectionTally::new(MAP_IOU);
        assert_eq!(tally.mean_ap(), 1.0);
        tally.add_image(&[det(0, Benign, 0.9)], &[]);
        assert_eq!(tally.mean_ap(), 0.0);

        let mut tally = DetectionTally::new(MAP_IOU);
        tally.add_image(&[det(0, Benign, 0.9), det(30, Malignant, 0.9)], &[gt(0, Benign), gt(60, Malignant)]);
        assert_eq!(tally.per_class_ap()[&Benign], 1.0);
        assert_eq!(tally.per_class_ap()[&Malignant], 0.0);
        assert_eq!(tally.mean_ap(), 0.5);
    }
}
