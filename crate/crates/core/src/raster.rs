//! Raster and box types shared by every stage of the pipeline.
//!
//! Coordinates follow image layout: `x` is the column (cross-range), `y` the
//! row (range), origin at the top-left pixel.

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex-valued SAR image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRaster {
    width: usize,
    height: usize,
    samples: Vec<Complex32>,
}

impl ComplexRaster {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            samples: vec![Complex32::new(0.0, 0.0); width * height],
        }
    }

    pub fn from_samples(width: usize, height: usize, samples: Vec<Complex32>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format(format!("raster dimensions {width}x{height} overflow")))?;
        if samples.len() != expected {
            return Err(Error::Format(format!(
                "raster {width}x{height} needs {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Complex32) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[Complex32] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex32] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex32> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex32 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: Complex32) {
        self.samples[y * self.width + x] = z;
    }

    /// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::config(format!(
                "crop {w}x{h}@({x0},{y0}) exceeds raster {}x{}",
                self.width, self.height
            )));
        }
        let mut samples = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            samples.extend_from_slice(&self.samples[row + x0..row + x0 + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            samples,
        })
    }

    /// Sum of |z|² over all samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr() as f64).sum()
    }

    pub fn mean_intensity(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy() / self.samples.len() as f64
    }

    pub fn scaled(&self, k: f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|z| z * k).collect(),
        }
    }
}

/// Class codes used in masks.
pub mod label {
    pub const BACKGROUND: u8 = 0;
    pub const TARGET: u8 = 1;
    pub const SHADOW: u8 = 2;
}

/// Per-pixel 3-class label image (background / target / shadow).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![label::BACKGROUND; width * height],
        }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(labels.len()) {
            return Err(Error::Format(format!(
                "mask {width}x{height} does not match {} labels",
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > label::SHADOW) {
            return Err(Error::Format(format!(
                "invalid mask label {} at index {i}",
                labels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Sets a label. Values outside the 3-class set are rejected.
    pub fn set(&mut self, x: usize, y: usize, l: u8) -> Result<()> {
        if l > label::SHADOW {
            return Err(Error::Format(format!("invalid mask label {l}")));
        }
        self.labels[y * self.width + x] = l;
        Ok(())
    }

    pub(crate) fn set_unchecked(&mut self, x: usize, y: usize, l: u8) {
        self.labels[y * self.width + x] = l;
    }

    pub fn count(&self, l: u8) -> usize {
        self.labels.iter().filter(|&&v| v == l).count()
    }

    /// Tight box over every pixel carrying label `l`.
    pub fn bbox_of(&self, l: u8) -> Option<BBox> {
        let mut acc: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == l {
                    acc = Some(match acc {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        acc.map(|(x0, y0, x1, y1)| BBox::from_pixels(x0, y0, x1 + 1, y1 + 1))
    }
}

/// 8-bit grey image (display product).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Axis-aligned box, half-open: `[x_min, x_max) × [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn from_pixels(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Self {
        Self {
            x_min: x_min as f64,
            y_min: y_min as f64,
            x_max: x_max as f64,
            y_max: y_max as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min < 0.0 || self.y_min < 0.0 {
            return Err(Error::Annotation(format!("invalid box {self:?}")));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Annotation(format!("empty box {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    pub fn inside_scene(&self, width: usize, height: usize) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= width as f64
            && self.y_max <= height as f64
    }
}

/// Whether an annotated object is an object of interest or a distractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Distractor,
}

/// Simulated or measured target signature paired with its mask and pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetChip {
    pub signature: ComplexRaster,
    pub shadow_mask: Mask,
    pub class_name: String,
    pub azimuth_deg: f64,
    pub depression_deg: f64,
}

impl TargetChip {
    pub fn new(
        signature: ComplexRaster,
        shadow_mask: Mask,
        class_name: impl Into<String>,
        azimuth_deg: f64,
        depression_deg: f64,
    ) -> Result<Self> {
        if signature.dims() != shadow_mask.dims() {
            return Err(Error::Format(format!(
                "signature {:?} and mask {:?} dimensions differ",
                signature.dims(),
                shadow_mask.dims()
            )));
        }
        Ok(Self {
            signature,
            shadow_mask,
            class_name: class_name.into(),
            azimuth_deg: azimuth_deg.rem_euclid(360.0),
            depression_deg,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.signature.dims()
    }
}
