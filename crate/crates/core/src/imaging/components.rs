use std::collections::VecDeque;

use crate::geometry::BoundingBox;

use super::BinaryMask;

/// One 8-connected foreground region and its tight bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
}

/// Splits a mask into its 8-connected components.
///
/// Components are returned in the row-major order of their first pixel. Each
/// component mask has the input's shape.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.as_slice();
    let mut visited = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();

    for start in 0..w * h {
        if !bits[start] || visited[start] {
            continue;
        }
        let mut member = vec![false; w * h];
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        visited[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            member[idx] = true;
            let (x, y) = (idx % w, idx / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if bits[n] && !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        let bbox = BoundingBox::from_corners(x0 as i64, y0 as i64, x1 as i64 + 1, y1 as i64 + 1)
            .expect("component has at least one pixel");
        let mask = BinaryMask::from_vec(mask.size(), member).expect("same shape as input");
        out.push(Component { mask, bbox });
    }
    out
}

/// Minimal box containing every set pixel, or `None` for an empty mask.
pub fn tight_box(mask: &BinaryMask) -> Option<BoundingBox> {
    let w = mask.width() as usize;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let mut any = false;
    for (i, _) in mask.as_slice().iter().enumerate().filter(|(_, &b)| b) {
        any = true;
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    any.then(|| {
        BoundingBox::from_corners(x0 as i64, y0 as i64, x1 as i64 + 1, y1 as i64 + 1).expect("non-empty")
    })
}
