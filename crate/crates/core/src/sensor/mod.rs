//! The imaging "sensor function": band limitation with apodisation, complex
//! thermal noise, and the quarter-power display LUT.

mod augment;
pub mod window;

use num_complex::{Complex32, Complex64};
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2d;
use crate::raster::{ComplexRaster, Gray8};
use crate::rng::Stream;

pub use augment::{sample_augmentation, AugmentationConfig, AugmentationDraw};
pub use window::{make_window, Window, WindowRegistry, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub range_resolution_px: f64,
    pub crossrange_resolution_px: f64,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            range_resolution_px: 1.0,
            crossrange_resolution_px: 1.0,
            window: WindowSpec::default(),
            noise_sigma: 0.0,
        }
    }
}

impl SensorConfig {
    /// Full-band, rectangular, noiseless: the sensor function is the identity.
    pub fn ideal() -> Self {
        Self {
            window: WindowSpec::rectangular(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("range_resolution_px", self.range_resolution_px),
            ("crossrange_resolution_px", self.crossrange_resolution_px),
        ] {
            if !(r >= 1.0) || !r.is_finite() {
                return Err(Error::config(format!("{name} must be >= 1 pixel, got {r}")));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        self.window.build().map(|_| ())
    }

    /// Power gain the sensor function applies to white noise: mean of the
    /// squared spectral weights over each axis, multiplied.
    pub fn noise_power_gain(&self, width: usize, height: usize) -> Result<f64> {
        let window = self.window.build()?;
        let rows = axis_weights(height, self.range_resolution_px, window.as_ref());
        let cols = axis_weights(width, self.crossrange_resolution_px, window.as_ref());
        let g = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        Ok(g(&rows) * g(&cols))
    }
}

/// Candidate frequencies of an `n`-point axis with their spectral weights.
///
/// The retained band is `[-B/2, B/2]` with `B = n / resolution` bins. Each
/// candidate bin is weighted by the fraction of its unit width lying inside
/// the band times the peak-normalised window. For even `n`, the Nyquist bin
/// appears twice (`±n/2`); the two halves sum when mapped back to bins.
pub(crate) fn band_candidates(n: usize, resolution: f64, window: &dyn Window) -> Vec<(i64, f64)> {
    let band = n as f64 / resolution;
    let half = (n / 2) as i64;
    (-half..=half)
        .filter_map(|f| {
            // at full band each of the ±n/2 pair covers half of the shared bin
            let coverage = (band / 2.0 - (f.abs() as f64 - 0.5)).clamp(0.0, 1.0);
            if coverage <= 0.0 {
                return None;
            }
            Some((f, coverage * window.normalized(f as f64 / band)))
        })
        .collect()
}

/// Per-bin weights (bin order of the FFT output).
pub(crate) fn axis_weights(n: usize, resolution: f64, window: &dyn Window) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (f, weight) in band_candidates(n, resolution, window) {
        w[f.rem_euclid(n as i64) as usize] += weight;
    }
    w
}

/// Band-limit and apodise an image on its own sampling grid.
///
/// Forward 2-D DFT, keep the central `1/resolution` fraction of each axis
/// (rows use the range resolution, columns the cross-range resolution),
/// weight by the separable window, inverse DFT.
pub fn apply_sensor_function(img: &ComplexRaster, cfg: &SensorConfig) -> Result<ComplexRaster> {
    let (w, h) = img.dims();
    if w < 4 || h < 4 {
        return Err(Error::config(format!(
            "sensor function needs at least 4x4 pixels, got {w}x{h}"
        )));
    }
    cfg.validate()?;
    let window = cfg.window.build()?;
    let rows = axis_weights(h, cfg.range_resolution_px, window.as_ref());
    let cols = axis_weights(w, cfg.crossrange_resolution_px, window.as_ref());

    let mut data: Vec<Complex64> = img
        .samples()
        .iter()
        .map(|z| Complex64::new(z.re as f64, z.im as f64))
        .collect();
    fft2d(&mut data, w, h, FftDirection::Forward);
    for (ky, wy) in rows.iter().enumerate() {
        let row = &mut data[ky * w..(ky + 1) * w];
        if *wy == 0.0 {
            row.fill(Complex64::default());
            continue;
        }
        for (z, wx) in row.iter_mut().zip(&cols) {
            *z *= wy * wx;
        }
    }
    fft2d(&mut data, w, h, FftDirection::Inverse);
    Ok(to_raster(w, h, &data))
}

pub(crate) fn to_raster(w: usize, h: usize, data: &[Complex64]) -> ComplexRaster {
    let samples = data
        .iter()
        .map(|z| Complex32::new(z.re as f32, z.im as f32))
        .collect();
    ComplexRaster::from_samples(w, h, samples).expect("finite FFT output")
}

/// Adds independent `N(0, sigma²)` draws to the real and imaginary part of
/// every sample.
pub fn add_thermal_noise(img: &ComplexRaster, sigma: f64, stream: &mut Stream) -> ComplexRaster {
    let mut out = img.clone();
    if sigma == 0.0 {
        return out;
    }
    for z in out.samples_mut() {
        let re: f64 = StandardNormal.sample(stream);
        let im: f64 = StandardNormal.sample(stream);
        *z += Complex32::new((re * sigma) as f32, (im * sigma) as f32);
    }
    out
}

pub const DEFAULT_LUT_PERCENTILE: f64 = 99.5;

/// Quarter-power display mapping to 8 bits.
///
/// `v = (|z|²)^¼`; the `percentile`-th percentile of `v` (linear
/// interpolation between order statistics) maps to 255, values above clip.
pub fn quarter_power_lut(img: &ComplexRaster, percentile: f64) -> Result<Gray8> {
    if img.samples().is_empty() {
        return Err(Error::config("cannot map an empty image"));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::config(format!("percentile {percentile} outside [0, 100]")));
    }
    let v: Vec<f64> = img.samples().iter().map(|z| (z.norm() as f64).sqrt()).collect();
    let reference = percentile_of(&v, percentile);
    let scale = if reference > 0.0 { 255.0 / reference } else { 0.0 };
    let pixels = v
        .iter()
        .map(|x| (x * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(Gray8 {
        width: img.width(),
        height: img.height(),
        pixels,
    })
}

fn percentile_of(values: &[f64], percentile: f64) -> f64 {
    let n = values.len();
    let rank = percentile / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let mut scratch = values.to_vec();
    let (_, lo_val, upper) = scratch.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return lo_val;
    }
    let hi_val = upper.iter().cloned().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}
