//! Axis-aligned integer boxes and the image <-> ROI coordinate transforms.
//!
//! Boxes are closed-open pixel rectangles: a box covers columns `x..x+w` and
//! rows `y..y+h`, so its area is exactly `w * h` pixels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width and height of an image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(self) -> usize {
        self.width as usize * self.height as usize
    }

    /// The box covering the whole image.
    pub fn full_box(self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height).expect("image size must be non-empty")
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A pixel position, in either image or ROI coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

#[derive(Deserialize)]
struct RawBox {
    x: i32,
    y: i32,
    w: i64,
    h: i64,
}

/// Axis-aligned pixel rectangle with `w >= 1` and `h >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    x: i32,
    y: i32,
    w: u32,
    h: u32,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        if raw.w < 1 || raw.h < 1 || raw.w > u32::MAX as i64 || raw.h > u32::MAX as i64 {
            return Err(Error::EmptyBox { w: raw.w, h: raw.h });
        }
        Ok(Self { x: raw.x, y: raw.y, w: raw.w as u32, h: raw.h as u32 })
    }
}

impl BoundingBox {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::EmptyBox { w: w as i64, h: h as i64 });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds the box spanning `[x0, x1) x [y0, y1)`.
    pub fn from_corners(x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self> {
        let (w, h) = (x1 - x0, y1 - y0);
        if w < 1 || h < 1 {
            return Err(Error::EmptyBox { w, h });
        }
        Ok(Self { x: x0 as i32, y: y0 as i32, w: w as u32, h: h as u32 })
    }

    pub fn x(&self) -> i32 {
        self.x
    }

    pub fn y(&self) -> i32 {
        self.y
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    /// Exclusive right edge.
    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.w, self.h)
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, p: Point) -> bool {
        let (px, py) = (p.x as i64, p.y as i64);
        px >= self.x as i64 && px < self.right() && py >= self.y as i64 && py < self.bottom()
    }

    /// True when the box lies inside `[0, W) x [0, H)`.
    pub fn fits_within(&self, bounds: ImageSize) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= bounds.width as i64 && self.bottom() <= bounds.height as i64
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let iw = self.right().min(other.right()) - (self.x as i64).max(other.x as i64);
        let ih = self.bottom().min(other.bottom()) - (self.y as i64).max(other.y as i64);
        if iw <= 0 || ih <= 0 {
            0
        } else {
            (iw * ih) as u64
        }
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        BoundingBox::from_corners(
            (self.x as i64).max(other.x as i64),
            (self.y as i64).max(other.y as i64),
            self.right().min(other.right()),
            self.bottom().min(other.bottom()),
        )
        .ok()
    }
}

/// Intersection over union of two boxes using pixel areas.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Clips `b` to the image; fails if nothing of the box remains.
pub fn clip_box(b: &BoundingBox, bounds: ImageSize) -> Result<BoundingBox> {
    b.intersection(&bounds.full_box())
        .ok_or(Error::BoxOutsideImage { bbox: *b, bounds })
}

/// Grows the box by `offset` pixels in width and in height, half on each
/// side so the center stays put, then clips it to the image.
pub fn expand_box(b: &BoundingBox, offset: u32, bounds: ImageSize) -> Result<BoundingBox> {
    if !offset.is_multiple_of(2) {
        return Err(Error::OddOffset(offset));
    }
    let half = (offset / 2) as i64;
    let grown = BoundingBox::from_corners(
        b.x as i64 - half,
        b.y as i64 - half,
        b.right() + half,
        b.bottom() + half,
    )?;
    clip_box(&grown, bounds)
}

/// Image coordinates to coordinates relative to the ROI's top-left corner.
pub fn to_roi(p: Point, roi: &BoundingBox) -> Point {
    Point::new(p.x - roi.x, p.y - roi.y)
}

/// Inverse of [`to_roi`].
pub fn from_roi(p: Point, roi: &BoundingBox) -> Point {
    Point::new(p.x + roi.x, p.y + roi.y)
}
