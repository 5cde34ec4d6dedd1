use num_complex::Complex32;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ComplexRaster;
use crate::rng::Stream;

/// Textured (K-distributed) clutter parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterConfig {
    pub mean_intensity: f64,
    /// Gamma shape ν of the texture; `None` means ν = ∞ (pure speckle).
    #[serde(default)]
    pub texture_shape: Option<f64>,
    #[serde(default)]
    pub correlation_px: f64,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self {
            mean_intensity: 1.0,
            texture_shape: Some(4.0),
            correlation_px: 5.0,
        }
    }
}

impl ClutterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_intensity > 0.0) || !self.mean_intensity.is_finite() {
            return Err(Error::config("clutter mean_intensity must be > 0"));
        }
        if let Some(nu) = self.texture_shape {
            if !(nu > 0.0) || !nu.is_finite() {
                return Err(Error::config("clutter texture_shape must be > 0"));
            }
        }
        if !(self.correlation_px >= 0.0) || !self.correlation_px.is_finite() {
            return Err(Error::config("clutter correlation_px must be >= 0"));
        }
        Ok(())
    }
}

/// Centred running mean of width `k` along rows then columns; edge windows
/// are truncated and renormalised.
fn box_smooth(field: &mut [f64], w: usize, h: usize, k: usize) {
    if k <= 1 {
        return;
    }
    let before = (k - 1) / 2;
    let after = k - 1 - before;
    let mut line = Vec::new();
    let mut prefix = Vec::new();
    let smooth_line = |line: &mut Vec<f64>, prefix: &mut Vec<f64>| {
        let n = line.len();
        prefix.clear();
        prefix.push(0.0);
        for v in line.iter() {
            prefix.push(prefix.last().unwrap() + v);
        }
        for (i, out) in line.iter_mut().enumerate() {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            *out = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        }
    };
    for y in 0..h {
        line.clear();
        line.extend_from_slice(&field[y * w..(y + 1) * w]);
        smooth_line(&mut line, &mut prefix);
        field[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| field[y * w + x]));
        smooth_line(&mut line, &mut prefix);
        for (y, v) in line.iter().enumerate() {
            field[y * w + x] = *v;
        }
    }
}

/// Circular-Gaussian speckle modulated by the square root of a smoothed
/// Gamma(ν, mean/ν) texture.
pub fn synthesize_clutter(
    width: usize,
    height: usize,
    cfg: &ClutterConfig,
    stream: &mut Stream,
) -> Result<ComplexRaster> {
    if width < 64 || height < 64 {
        return Err(Error::config(format!(
            "clutter needs at least 64x64 pixels, got {width}x{height}"
        )));
    }
    cfg.validate()?;
    let n = width * height;
    let texture = match cfg.texture_shape {
        Some(nu) => {
            let gamma = Gamma::new(nu, cfg.mean_intensity / nu)
                .map_err(|e| Error::config(format!("texture distribution: {e}")))?;
            let mut t: Vec<f64> = (0..n).map(|_| gamma.sample(stream)).collect();
            box_smooth(&mut t, width, height, cfg.correlation_px.round() as usize);
            t
        }
        None => vec![cfg.mean_intensity; n],
    };
    let samples = texture
        .iter()
        .map(|t| {
            let re: f64 = StandardNormal.sample(stream);
            let im: f64 = StandardNormal.sample(stream);
            let a = (t / 2.0).sqrt();
            Complex32::new((re * a) as f32, (im * a) as f32)
        })
        .collect();
    ComplexRaster::from_samples(width, height, samples)
}
