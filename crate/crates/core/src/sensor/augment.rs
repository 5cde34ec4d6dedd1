use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SensorConfig;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Domain-randomisation ranges drawn once per scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    /// Multiplicative factor range, drawn independently per axis.
    pub resolution_jitter: [f64; 2],
    /// Absolute per-component noise sigma range. `None` keeps the sensor's
    /// own `noise_sigma`.
    pub noise_sigma_range: Option<[f64; 2]>,
    pub n_targets_range: [u32; 2],
    pub bright_fraction: f64,
    pub dropout_share: f64,
    pub crop_size: usize,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            resolution_jitter: [1.0, 1.0],
            noise_sigma_range: None,
            n_targets_range: [1, 3],
            bright_fraction: 0.01,
            dropout_share: 0.5,
            crop_size: 640,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, lo: f64, hi: f64| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(Error::config(format!("{name}: need lo <= hi, got [{lo}, {hi}]")))
            }
        };
        ordered("resolution_jitter", self.resolution_jitter[0], self.resolution_jitter[1])?;
        if self.resolution_jitter[0] <= 0.0 {
            return Err(Error::config("resolution_jitter must be positive"));
        }
        if let Some([lo, hi]) = self.noise_sigma_range {
            ordered("noise_sigma_range", lo, hi)?;
            if lo < 0.0 {
                return Err(Error::config("noise_sigma_range must be >= 0"));
            }
        }
        let [nlo, nhi] = self.n_targets_range;
        if nlo < 1 || nhi > 16 || nlo > nhi {
            return Err(Error::config(format!(
                "n_targets_range must satisfy 1 <= lo <= hi <= 16, got [{nlo}, {nhi}]"
            )));
        }
        for (name, f) in [
            ("bright_fraction", self.bright_fraction),
            ("dropout_share", self.dropout_share),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!("{name} must be in (0, 1], got {f}")));
            }
        }
        if self.crop_size == 0 {
            return Err(Error::config("crop_size must be positive"));
        }
        Ok(())
    }
}

/// Concrete per-scene parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationDraw {
    pub range_resolution_px: f64,
    pub crossrange_resolution_px: f64,
    pub noise_sigma: f64,
    pub n_targets: u32,
}

impl AugmentationDraw {
    /// The base sensor with this draw's resolutions and noise level.
    pub fn apply_to(&self, base: &SensorConfig) -> SensorConfig {
        SensorConfig {
            range_resolution_px: self.range_resolution_px,
            crossrange_resolution_px: self.crossrange_resolution_px,
            noise_sigma: self.noise_sigma,
            window: base.window.clone(),
        }
    }
}

fn uniform(stream: &mut Stream, [lo, hi]: [f64; 2]) -> f64 {
    let u: f64 = stream.random();
    lo + (hi - lo) * u
}

/// Draws range jitter, cross-range jitter, noise sigma and target count, in
/// that order. Resolutions never drop below one pixel.
pub fn sample_augmentation(
    cfg: &AugmentationConfig,
    base: &SensorConfig,
    stream: &mut Stream,
) -> AugmentationDraw {
    let range = (base.range_resolution_px * uniform(stream, cfg.resolution_jitter)).max(1.0);
    let cross = (base.crossrange_resolution_px * uniform(stream, cfg.resolution_jitter)).max(1.0);
    let sigma = match cfg.noise_sigma_range {
        Some(r) => uniform(stream, r),
        None => base.noise_sigma,
    };
    let [lo, hi] = cfg.n_targets_range;
    let n_targets = stream.random_range(lo..=hi);
    AugmentationDraw {
        range_resolution_px: range,
        crossrange_resolution_px: cross,
        noise_sigma: sigma,
        n_targets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, SeedSpec};

    #[test]
    fn target_counts_uniform() {
        let cfg = AugmentationConfig::default();
        let base = SensorConfig::default();
        let mut s = derive_stream(SeedSpec::new(4, 0));
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[sample_augmentation(&cfg, &base, &mut s).n_targets as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            let f = *c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn degenerate_ranges() {
        let cfg = AugmentationConfig {
            resolution_jitter: [1.5, 1.5],
            noise_sigma_range: Some([0.2, 0.2]),
            n_targets_range: [2, 2],
            ..Default::default()
        };
        let base = SensorConfig {
            range_resolution_px: 2.0,
            crossrange_resolution_px: 1.0,
            ..Default::default()
        };
        let mut s = derive_stream(SeedSpec::new(1, 1));
        for _ in 0..50 {
            let d = sample_augmentation(&cfg, &base, &mut s);
            assert_eq!(d.range_resolution_px, 3.0);
            assert_eq!(d.crossrange_resolution_px, 1.5);
            assert_eq!(d.noise_sigma, 0.2);
            assert_eq!(d.n_targets, 2);
        }
    }

    #[test]
    fn same_stream_same_draw() {
        let cfg = AugmentationConfig {
            resolution_jitter: [0.8, 1.6],
            noise_sigma_range: Some([0.0, 1.0]),
            ..Default::default()
        };
        let base = SensorConfig::default();
        let a = sample_augmentation(&cfg, &base, &mut derive_stream(SeedSpec::new(9, 3)));
        let b = sample_augmentation(&cfg, &base, &mut derive_stream(SeedSpec::new(9, 3)));
        assert_eq!(a, b);
        assert!(a.range_resolution_px >= 1.0);
    }

    #[test]
    fn validation() {
        assert!(AugmentationConfig::default().validate().is_ok());
        let bad = [
            AugmentationConfig { resolution_jitter: [2.0, 1.0], ..Default::default() },
            AugmentationConfig { n_targets_range: [0, 3], ..Default::default() },
            AugmentationConfig { n_targets_range: [1, 17], ..Default::default() },
            AugmentationConfig { bright_fraction: 0.0, ..Default::default() },
            AugmentationConfig { dropout_share: 1.5, ..Default::default() },
            AugmentationConfig { noise_sigma_range: Some([0.3, 0.1]), ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
