use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageSize;

use super::{BinaryMask, Image, ProbMask, Raster};

/// Interpolation used when resizing.
///
/// Sampling uses half-pixel centers: destination index `d` reads source
/// coordinate `s = (d + 0.5) * src / dst - 0.5`, clamped to `[0, src - 1]`.
/// Taps that fall outside the source repeat the edge pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMethod {
    Nearest,
    Bilinear,
    /// Catmull-Rom cubic (a = -0.5).
    Bicubic,
}

impl fmt::Display for ResizeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResizeMethod::Nearest => "nearest",
            ResizeMethod::Bilinear => "bilinear",
            ResizeMethod::Bicubic => "bicubic",
        })
    }
}

impl FromStr for ResizeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(ResizeMethod::Nearest),
            "bilinear" => Ok(ResizeMethod::Bilinear),
            "bicubic" => Ok(ResizeMethod::Bicubic),
            other => Err(Error::InvalidArgument(format!("unknown resize method `{other}`"))),
        }
    }
}

pub trait Resizable: Sized {
    fn resize(&self, target: ImageSize, method: ResizeMethod) -> Result<Self>;
}

const CUBIC_A: f64 = -0.5;

fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Source taps and weights for every destination index along one axis.
fn axis_taps(src: u32, dst: u32, method: ResizeMethod) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as i64;
    let clamp_idx = |i: i64| i.clamp(0, last) as usize;
    (0..dst)
        .map(|d| match method {
            ResizeMethod::Nearest => {
                let i = ((d as f64 + 0.5) * scale).floor() as i64;
                vec![(clamp_idx(i), 1.0)]
            }
            ResizeMethod::Bilinear => {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last as f64);
                let i0 = s.floor();
                let t = s - i0;
                let i0 = i0 as i64;
                vec![(clamp_idx(i0), 1.0 - t), (clamp_idx(i0 + 1), t)]
            }
            ResizeMethod::Bicubic => {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last as f64);
                let i0 = s.floor();
                let t = s - i0;
                let i0 = i0 as i64;
                (-1..=2)
                    .map(|k| (clamp_idx(i0 + k), cubic_weight(t - k as f64)))
                    .collect()
            }
        })
        .collect()
}

fn resample(src: &[f64], size: ImageSize, target: ImageSize, method: ResizeMethod) -> Vec<f64> {
    let xs = axis_taps(size.width, target.width, method);
    let ys = axis_taps(size.height, target.height, method);
    let w = size.width as usize;
    let mut out = Vec::with_capacity(target.area());
    for ytaps in &ys {
        for xtaps in &xs {
            let mut acc = 0.0;
            for &(iy, wy) in ytaps {
                let row = &src[iy * w..(iy + 1) * w];
                for &(ix, wx) in xtaps {
                    acc += wy * wx * row[ix];
                }
            }
            out.push(acc);
        }
    }
    out
}

fn check_target(target: ImageSize) -> Result<()> {
    if target.width == 0 || target.height == 0 {
        return Err(Error::InvalidArgument(format!("resize target must be at least 1x1, got {target}")));
    }
    Ok(())
}

impl Resizable for Image {
    fn resize(&self, target: ImageSize, method: ResizeMethod) -> Result<Self> {
        check_target(target)?;
        if target == self.size() {
            return Ok(self.clone());
        }
        let src: Vec<f64> = self.as_slice().iter().map(|&v| v as f64).collect();
        let data = resample(&src, self.size(), target, method)
            .into_iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        Raster::from_vec(target, data)
    }
}

impl Resizable for ProbMask {
    fn resize(&self, target: ImageSize, method: ResizeMethod) -> Result<Self> {
        check_target(target)?;
        if target == self.size() {
            return Ok(self.clone());
        }
        let src: Vec<f64> = self.as_slice().iter().map(|&v| v as f64).collect();
        let data = resample(&src, self.size(), target, method)
            .into_iter()
            .map(|v| (v as f32).clamp(0.0, 1.0))
            .collect();
        Raster::from_vec(target, data)
    }
}

impl Resizable for BinaryMask {
    fn resize(&self, target: ImageSize, method: ResizeMethod) -> Result<Self> {
        if method != ResizeMethod::Nearest {
            return Err(Error::InvalidArgument(format!(
                "binary masks can only be resized with nearest sampling, not {method}"
            )));
        }
        check_target(target)?;
        if target == self.size() {
            return Ok(self.clone());
        }
        let src: Vec<f64> = self.as_slice().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let data = resample(&src, self.size(), target, method).into_iter().map(|v| v > 0.5).collect();
        Raster::from_vec(target, data)
    }
}
