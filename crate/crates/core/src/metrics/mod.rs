//! Segmentation and detection metrics.
//!
//! [`dice_loss`] is the factor-free soft Dice loss
//! `L = -sum(p g) / (sum(p^2) + sum(g^2))`, so a perfect binary prediction
//! scores -0.5. [`dice_coefficient`] is the usual `2|A n B| / (|A| + |B|)`.

mod ap;
mod report;

use crate::error::Result;
use crate::imaging::{BinaryMask, ProbMask};

pub use ap::{
    average_precision, match_detections, mean_average_precision, precision_recall_curve, ClassTally,
    DetectionTally, PRPoint, MAP_IOU,
};
pub use report::{evaluate, DetectionRow, EvalReport, EvalRow, ImageEval};

/// Denominator smoothing for [`dice_loss`].
pub const DICE_EPS: f64 = 1e-7;

pub fn dice_loss(p: &ProbMask, g: &BinaryMask) -> Result<f64> {
    p.ensure_same_size(g)?;
    let (mut pg, mut pp, mut gg) = (0.0f64, 0.0f64, 0.0f64);
    for (&pi, &gi) in p.as_slice().iter().zip(g.as_slice()) {
        let (pi, gi) = (pi as f64, if gi { 1.0 } else { 0.0 });
        pg += pi * gi;
        pp += pi * pi;
        gg += gi;
    }
    // + 0.0 turns the both-empty -0.0 into 0.0
    Ok(-pg / (pp + gg + DICE_EPS) + 0.0)
}

/// Standard Dice coefficient; two empty masks agree perfectly (1.0).
pub fn dice_coefficient(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_size(b)?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        inter += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Root mean squared per-pixel error between a prediction and a binary mask.
pub fn pixel_rmse(p: &ProbMask, g: &BinaryMask) -> Result<f64> {
    p.ensure_same_size(g)?;
    let sse: f64 = p
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&pi, &gi)| {
            let d = pi as f64 - if gi { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    Ok((sse / p.as_slice().len() as f64).sqrt())
}
