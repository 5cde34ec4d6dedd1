//! Cell-averaging CFAR baseline detector.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Prediction;
use crate::raster::{BBox, ComplexRaster, Gray8};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfarConfig {
    /// Half-width of the guard band around the cell under test.
    pub guard_px: usize,
    /// Width of the training band beyond the guard band.
    pub train_px: usize,
    pub threshold_factor: f64,
    pub min_area_px: usize,
    /// Radius of the square closing that bridges gaps between flagged pixels.
    pub merge_gap_px: usize,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard_px: 4,
            train_px: 8,
            threshold_factor: 3.0,
            min_area_px: 4,
            merge_gap_px: 2,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_px == 0 {
            return Err(Error::config("CFAR train_px must be > 0"));
        }
        if !(self.threshold_factor > 1.0) || !self.threshold_factor.is_finite() {
            return Err(Error::config(format!(
                "CFAR threshold_factor must be > 1, got {}",
                self.threshold_factor
            )));
        }
        Ok(())
    }

    /// Number of training cells around an interior pixel.
    pub fn training_cells(&self) -> usize {
        let outer = 2 * (self.guard_px + self.train_px) + 1;
        let inner = 2 * self.guard_px + 1;
        outer * outer - inner * inner
    }

    /// Factor giving false-alarm probability `pfa` on exponential intensity
    /// with `N` training cells: `α = N·(pfa^(−1/N) − 1)`.
    pub fn factor_for_pfa(&self, pfa: f64) -> f64 {
        let n = self.training_cells() as f64;
        n * (pfa.powf(-1.0 / n) - 1.0)
    }
}

/// Input accepted by detectors.
#[derive(Debug, Clone, Copy)]
pub enum SceneImage<'a> {
    Complex(&'a ComplexRaster),
    /// Quarter-power display image; intensity is recovered as `(v/255)^4`.
    Gray(&'a Gray8),
}

impl SceneImage<'_> {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            SceneImage::Complex(r) => r.dims(),
            SceneImage::Gray(g) => (g.width, g.height),
        }
    }

    pub fn intensity(&self) -> Vec<f64> {
        match self {
            SceneImage::Complex(r) => r.samples().iter().map(|z| z.norm_sqr() as f64).collect(),
            SceneImage::Gray(g) => g.pixels.iter().map(|&v| (v as f64 / 255.0).powi(4)).collect(),
        }
    }
}

/// Summed-area table with a zero row and column in front.
struct Integral {
    w: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(values: &[f64], w: usize, h: usize) -> Self {
        let mut table = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += values[y * w + x];
                table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
            }
        }
        Self { w, table }
    }

    /// Sum over `[x0, x1) × [y0, y1)`.
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.w + 1;
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0] + self.table[y0 * s + x0]
    }
}

fn clipped(c: usize, r: usize, n: usize) -> (usize, usize) {
    (c.saturating_sub(r), (c + r + 1).min(n))
}

/// Per-pixel ratio `I / (α · mean of training cells)`; the window is clipped
/// at the image border.
pub fn exceedance(intensity: &[f64], w: usize, h: usize, cfg: &CfarConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let min = 2 * (cfg.guard_px + cfg.train_px) + 1;
    if w <= min || h <= min || intensity.len() != w * h {
        return Err(Error::config(format!(
            "scene {w}x{h} too small for CFAR window {min}x{min}"
        )));
    }
    let ii = Integral::new(intensity, w, h);
    let outer = cfg.guard_px + cfg.train_px;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (oy0, oy1) = clipped(y, outer, h);
        let (gy0, gy1) = clipped(y, cfg.guard_px, h);
        for x in 0..w {
            let (ox0, ox1) = clipped(x, outer, w);
            let (gx0, gx1) = clipped(x, cfg.guard_px, w);
            let n = (ox1 - ox0) * (oy1 - oy0) - (gx1 - gx0) * (gy1 - gy0);
            let sum = ii.sum(ox0, oy0, ox1, oy1) - ii.sum(gx0, gy0, gx1, gy1);
            let level = cfg.threshold_factor * sum.max(0.0) / n as f64;
            let i = intensity[y * w + x];
            out[y * w + x] = if level > 0.0 {
                i / level
            } else if i > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// Pixels whose intensity exceeds α times the local training mean.
pub fn cfar_flags(intensity: &[f64], w: usize, h: usize, cfg: &CfarConfig) -> Result<Vec<bool>> {
    Ok(exceedance(intensity, w, h, cfg)?.into_iter().map(|r| r > 1.0).collect())
}

/// Square max (`dilate = true`) or min filter of radius `r`; outside pixels
/// count as `!dilate` so borders neither grow nor erode.
fn morph(mask: &[bool], w: usize, h: usize, r: usize, dilate: bool) -> Vec<bool> {
    let pass = |src: &[bool], horizontal: bool| {
        let mut out = vec![false; src.len()];
        for y in 0..h {
            for x in 0..w {
                let (c, n) = if horizontal { (x, w) } else { (y, h) };
                let (lo, hi) = (c.saturating_sub(r), (c + r + 1).min(n));
                let at = |k: usize| if horizontal { src[y * w + k] } else { src[k * w + x] };
                out[y * w + x] = if dilate {
                    (lo..hi).any(at)
                } else {
                    (lo..hi).all(at)
                };
            }
        }
        out
    };
    pass(&pass(mask, true), false)
}

/// Morphological closing with a `(2r+1)²` square.
pub fn close(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    morph(&morph(mask, w, h, r, true), w, h, r, false)
}

/// 8-connected components as lists of pixel indices, in raster order of
/// their first pixel.
pub fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn confidence_from_ratio(ratio: f64) -> f64 {
    (1.0 - (-(ratio - 1.0)).exp()).clamp(0.0, 1.0)
}

pub fn cfar_detect(scene: SceneImage<'_>, scene_id: &str, cfg: &CfarConfig) -> Result<Vec<Prediction>> {
    let (w, h) = scene.dims();
    let ratio = exceedance(&scene.intensity(), w, h, cfg)?;
    let flags: Vec<bool> = ratio.iter().map(|&r| r > 1.0).collect();
    let closed = close(&flags, w, h, cfg.merge_gap_px);
    let mut preds = Vec::new();
    for comp in components(&closed, w, h) {
        if comp.len() < cfg.min_area_px {
            continue;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut peak: f64 = 0.0;
        for &i in &comp {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            peak = peak.max(ratio[i]);
        }
        preds.push(Prediction {
            scene_id: scene_id.to_string(),
            bbox: BBox::from_pixels(x0, y0, x1 + 1, y1 + 1),
            confidence: confidence_from_ratio(peak),
        });
    }
    Ok(preds)
}

/// A detector producing scored boxes for one scene.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, scene: SceneImage<'_>, scene_id: &str) -> Result<Vec<Prediction>>;
}

pub struct CaCfar(pub CfarConfig);

impl Detector for CaCfar {
    fn name(&self) -> &str {
        "ca_cfar"
    }

    fn detect(&self, scene: SceneImage<'_>, scene_id: &str) -> Result<Vec<Prediction>> {
        cfar_detect(scene, scene_id, &self.0)
    }
}

pub type DetectorFactory = fn(&serde_json::Value) -> Result<Box<dyn Detector>>;

fn ca_cfar_factory(cfg: &serde_json::Value) -> Result<Box<dyn Detector>> {
    let c: CfarConfig = serde_json::from_value(cfg.clone())
        .map_err(|e| Error::config(format!("CFAR config: {e}")))?;
    c.validate()?;
    Ok(Box::new(CaCfar(c)))
}

/// Detectors by name, configured from JSON.
#[derive(Clone)]
pub struct DetectorRegistry {
    factories: BTreeMap<String, DetectorFactory>,
}

impl DetectorRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("ca_cfar", ca_cfar_factory);
        r
    }

    pub fn builtin() -> &'static DetectorRegistry {
        static REG: OnceLock<DetectorRegistry> = OnceLock::new();
        REG.get_or_init(Self::with_builtins)
    }

    pub fn register(&mut self, name: &str, factory: DetectorFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, cfg: &serde_json::Value) -> Result<Box<dyn Detector>> {
        let f = self.factories.get(name).ok_or_else(|| {
            Error::config(format!("unknown detector {name:?} (known: {})", self.names().join(", ")))
        })?;
        f(cfg)
    }
}
