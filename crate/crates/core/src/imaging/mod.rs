//! Image and mask containers plus the raster operations the pipeline needs:
//! connected components, crop/paste, resizing and binarization.

mod components;
mod io;
mod overlay;
mod resize;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageSize};

pub use components::{connected_components, tight_box, Component};
pub use io::{
    decode_gray, read_binary_mask, read_gray, read_prob_mask16, read_prob_mask8, write_binary_mask, write_gray,
    write_prob_mask16, write_prob_mask8,
};
pub use overlay::{render_overlay, write_overlay};
pub use resize::{ResizeMethod, Resizable};

/// Element type a [`Raster`] can hold.
pub trait Pixel: Copy + Default + PartialEq + Send + Sync + 'static {
    fn is_valid(self) -> bool {
        true
    }
}

impl Pixel for u8 {}

impl Pixel for bool {}

impl Pixel for f32 {
    fn is_valid(self) -> bool {
        (0.0..=1.0).contains(&self)
    }
}

/// Row-major 2D grid of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

/// 8-bit grayscale scan.
pub type Image = Raster<u8>;
/// Strictly binary mask (ground truth or binarized prediction).
pub type BinaryMask = Raster<bool>;
/// Per-pixel probabilities in `[0, 1]`.
pub type ProbMask = Raster<f32>;

impl<T: Pixel> Raster<T> {
    pub fn from_vec(size: ImageSize, data: Vec<T>) -> Result<Self> {
        if size.width == 0 || size.height == 0 {
            return Err(Error::InvalidRaster(format!("empty raster {size}")));
        }
        if data.len() != size.area() {
            return Err(Error::InvalidRaster(format!(
                "{} values for a {size} raster",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_valid()) {
            return Err(Error::InvalidRaster(format!("value out of range at index {i}")));
        }
        Ok(Self { width: size.width, height: size.height, data })
    }

    pub fn filled(size: ImageSize, value: T) -> Self {
        assert!(size.width > 0 && size.height > 0, "empty raster");
        assert!(value.is_valid(), "fill value out of range");
        Self { width: size.width, height: size.height, data: vec![value; size.area()] }
    }

    pub fn from_fn(size: ImageSize, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut data = Vec::with_capacity(size.area());
        for y in 0..size.height {
            for x in 0..size.width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(size, data).expect("from_fn produced an invalid raster")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: T) {
        debug_assert!(value.is_valid());
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }

    pub fn map<U: Pixel>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster::from_vec(self.size(), self.data.iter().map(|&v| f(v)).collect())
            .expect("map produced an invalid raster")
    }

    pub fn ensure_same_size<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch {
                expected: self.size(),
                actual: ImageSize::new(other.width, other.height),
            });
        }
        Ok(())
    }

    /// Copies the `roi` region; the ROI must lie inside the raster.
    pub fn crop(&self, roi: &BoundingBox) -> Result<Self> {
        if !roi.fits_within(self.size()) {
            return Err(Error::BoxOutsideImage { bbox: *roi, bounds: self.size() });
        }
        let (x0, y0) = (roi.x() as usize, roi.y() as usize);
        let w = self.width as usize;
        let mut data = Vec::with_capacity(roi.size().area());
        for row in y0..y0 + roi.h() as usize {
            let start = row * w + x0;
            data.extend_from_slice(&self.data[start..start + roi.w() as usize]);
        }
        Ok(Self { width: roi.w(), height: roi.h(), data })
    }

    /// Returns a copy of `self` whose `roi` region is replaced by `patch`.
    pub fn paste(&self, patch: &Self, roi: &BoundingBox) -> Result<Self> {
        if patch.size() != roi.size() {
            return Err(Error::ShapeMismatch { expected: roi.size(), actual: patch.size() });
        }
        if !roi.fits_within(self.size()) {
            return Err(Error::BoxOutsideImage { bbox: *roi, bounds: self.size() });
        }
        let mut out = self.clone();
        let (x0, y0) = (roi.x() as usize, roi.y() as usize);
        let (w, pw) = (self.width as usize, patch.width as usize);
        for row in 0..patch.height as usize {
            let dst = (y0 + row) * w + x0;
            out.data[dst..dst + pw].copy_from_slice(&patch.data[row * pw..(row + 1) * pw]);
        }
        Ok(out)
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        Self::from_fn(self.size(), |x, y| self.get(w - 1 - x, y))
    }
}

impl BinaryMask {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Pixel-wise OR; both masks must have the same shape.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.ensure_same_size(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect();
        Ok(Raster { width: self.width, height: self.height, data })
    }

    /// Clears every pixel outside `bbox`.
    pub fn restrict_to(&self, bbox: &BoundingBox) -> BinaryMask {
        Raster::from_fn(self.size(), |x, y| {
            self.get(x, y) && bbox.contains(crate::geometry::Point::new(x as i32, y as i32))
        })
    }

    pub fn to_prob(&self) -> ProbMask {
        self.map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl Image {
    /// Intensities mapped to `[0, 1]` by dividing by 255.
    pub fn to_prob(&self) -> ProbMask {
        self.map(|v| v as f32 / 255.0)
    }
}

/// Binarizes a probability mask: a pixel is set iff `prob >= t`.
pub fn threshold(p: &ProbMask, t: f32) -> BinaryMask {
    p.map(|v| v >= t)
}
