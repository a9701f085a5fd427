//! Independent reference implementations used as test oracles. None of
//! these call into the code paths they check.

#![allow(dead_code)]

use rand::Rng;
use roiseg::dataset::AugmentParams;
use roiseg::detection::Detection;
use roiseg::imaging::BinaryMask;
use roiseg::{BoundingBox, ClassLabel, ImageSize};

/// Pixel-count IoU: both boxes rasterized on a bitset grid.
pub struct Raster {
    words: usize,
    width: usize,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self { words: (width * height).div_ceil(64), width }
    }

    pub fn rasterize(&self, b: &BoundingBox) -> Vec<u64> {
        let mut bits = vec![0u64; self.words];
        for y in b.y()..b.y() + b.h() as i32 {
            for x in b.x()..b.x() + b.w() as i32 {
                let i = y as usize * self.width + x as usize;
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        bits
    }

    pub fn iou(a: &[u64], b: &[u64]) -> f64 {
        let inter: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
        let union: u32 = a.iter().zip(b).map(|(x, y)| (x | y).count_ones()).sum();
        inter as f64 / union as f64
    }
}

/// IoU from corner arithmetic, written independently of the library.
pub fn corner_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax1, ay1) = (a.x() as i64 + a.w() as i64, a.y() as i64 + a.h() as i64);
    let (bx1, by1) = (b.x() as i64 + b.w() as i64, b.y() as i64 + b.h() as i64);
    let iw = (ax1.min(bx1) - (a.x() as i64).max(b.x() as i64)).max(0);
    let ih = (ay1.min(by1) - (a.y() as i64).max(b.y() as i64)).max(0);
    let inter = iw * ih;
    let union = a.w() as i64 * a.h() as i64 + b.w() as i64 * b.h() as i64 - inter;
    inter as f64 / union as f64
}

/// O(n^2) NMS: repeatedly take the best survivor and delete everything
/// overlapping it by more than `iou_t`.
pub fn nms_oracle(dets: &[Detection], conf: f64, iou_t: f64) -> Vec<Detection> {
    let mut alive: Vec<(usize, Detection)> =
        dets.iter().copied().enumerate().filter(|(_, d)| d.score() >= conf).collect();
    let mut kept = Vec::new();
    while !alive.is_empty() {
        let mut best = 0;
        for i in 1..alive.len() {
            let (ia, a) = &alive[i];
            let (ib, b) = &alive[best];
            let better = a.score() > b.score()
                || (a.score() == b.score()
                    && (a.bbox().x(), a.bbox().y(), *ia) < (b.bbox().x(), b.bbox().y(), *ib));
            if better {
                best = i;
            }
        }
        let (_, winner) = alive.remove(best);
        alive.retain(|(_, d)| corner_iou(winner.bbox(), d.bbox()) <= iou_t);
        kept.push(winner);
    }
    kept
}

/// AP by enumerating every score threshold and integrating the staircase
/// of interpolated precision over recall.
pub fn ap_oracle(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let tp = scored.iter().filter(|s| s.0 >= t && s.1).count();
            let n = scored.iter().filter(|s| s.0 >= t).count();
            (tp as f64 / n_gt as f64, tp as f64 / n as f64)
        })
        .collect();
    let mut levels: Vec<f64> = points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let mut area = 0.0;
    let mut prev = 0.0;
    for r in levels {
        let p = points.iter().filter(|q| q.0 >= r).map(|q| q.1).fold(0.0, f64::max);
        area += (r - prev) * p;
        prev = r;
    }
    area
}

/// Union-find 8-connected labeling. Returns, per component, its sorted
/// pixel indices and its tight box, ordered by first pixel.
pub fn label_oracle(mask: &BinaryMask) -> Vec<(Vec<usize>, BoundingBox)> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.as_slice();
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            // earlier neighbours: W, NW, N, NE
            let mut neigh = Vec::new();
            if x > 0 {
                neigh.push(i - 1);
            }
            if y > 0 {
                neigh.push(i - w);
                if x > 0 {
                    neigh.push(i - w - 1);
                }
                if x + 1 < w {
                    neigh.push(i - w + 1);
                }
            }
            for n in neigh {
                if bits[n] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, n));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut comps: Vec<(Vec<usize>, BoundingBox)> = groups
        .into_values()
        .map(|px| {
            let xs = px.iter().map(|i| (i % w) as i64);
            let ys = px.iter().map(|i| (i / w) as i64);
            let b = BoundingBox::from_corners(
                xs.clone().min().unwrap(),
                ys.clone().min().unwrap(),
                xs.max().unwrap() + 1,
                ys.max().unwrap() + 1,
            )
            .unwrap();
            (px, b)
        })
        .collect();
    comps.sort_by_key(|c| c.0[0]);
    comps
}

pub fn random_mask<R: Rng>(rng: &mut R, size: ImageSize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(size, |_, _| rng.random_bool(density))
}

/// Inverse-mapped nearest-neighbour warp written as an explicit 2x2 matrix.
pub fn warp_oracle(mask: &BinaryMask, p: &AugmentParams) -> BinaryMask {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let th = p.angle_deg.to_radians();
    // rotation by -theta, then 1/scale, then optional mirror of x
    let f = if p.flip { -1.0 } else { 1.0 };
    let m = [[f * th.cos(), f * th.sin()], [-th.sin(), th.cos()]];
    BinaryMask::from_fn(mask.size(), |u, v| {
        let (dx, dy) = (u as f64 - cx, v as f64 - cy);
        let sx = cx + (m[0][0] * dx + m[0][1] * dy) / p.scale;
        let sy = cy + (m[1][0] * dx + m[1][1] * dy) / p.scale;
        let (ix, iy) = ((sx + 0.5).floor(), (sy + 0.5).floor());
        ix >= 0.0 && iy >= 0.0 && ix < w && iy < h && mask.get(ix as u32, iy as u32)
    })
}

pub fn random_detection<R: Rng>(rng: &mut R, extent: i32, max_side: u32) -> Detection {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let x = rng.random_range(0..extent - w as i32 + 1);
    let y = rng.random_range(0..extent - h as i32 + 1);
    let label = if rng.random_bool(0.5) { ClassLabel::Benign } else { ClassLabel::Malignant };
    // coarse score grid so ties actually happen
    let score = rng.random_range(0..=20) as f64 / 20.0;
    Detection::new(BoundingBox::new(x, y, w, h).unwrap(), label, score).unwrap()
}

/// Number of set pixels that fall outside `bbox`.
pub fn pixels_outside(mask: &BinaryMask, bbox: &BoundingBox) -> usize {
    let mut n = 0;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) && !bbox.contains(roiseg::Point::new(x as i32, y as i32)) {
                n += 1;
            }
        }
    }
    n
}
