use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2d;
use crate::raster::{label, ComplexRaster, Mask};
use crate::sensor::{band_candidates, to_raster, SensorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Point scattering centres plus the ground outline that casts the shadow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSet {
    pub scatterers: Vec<Scatterer>,
    pub footprint: Vec<(f64, f64)>,
    /// Shadow length in range pixels.
    pub height_px: f64,
}

impl ScattererSet {
    pub fn validate(&self, chip_size: usize) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::config("scatterer set is empty"));
        }
        let max = (chip_size - 1) as f64;
        for s in &self.scatterers {
            let ok = [s.x, s.y, s.amplitude, s.phase].iter().all(|v| v.is_finite())
                && (0.0..=max).contains(&s.x)
                && (0.0..=max).contains(&s.y)
                && s.amplitude >= 0.0;
            if !ok {
                return Err(Error::config(format!(
                    "scatterer {s:?} outside a {chip_size}px chip or invalid"
                )));
            }
        }
        if !(self.height_px >= 0.0) || !self.height_px.is_finite() {
            return Err(Error::config(format!("invalid shadow height {}", self.height_px)));
        }
        if polygon_area(&self.footprint) < 1.0 {
            return Err(Error::config("degenerate footprint polygon (area < 1 px²)"));
        }
        if !polygon_is_simple(&self.footprint) {
            return Err(Error::config("footprint polygon self-intersects"));
        }
        Ok(())
    }

    /// Rotates scatterers and footprint by `azimuth_deg` about `center`.
    pub fn rotated(&self, azimuth_deg: f64, center: (f64, f64)) -> Self {
        let a = azimuth_deg.rem_euclid(360.0).to_radians();
        let (s, c) = a.sin_cos();
        let rot = |x: f64, y: f64| {
            let (dx, dy) = (x - center.0, y - center.1);
            (center.0 + dx * c - dy * s, center.1 + dx * s + dy * c)
        };
        Self {
            scatterers: self
                .scatterers
                .iter()
                .map(|p| {
                    let (x, y) = rot(p.x, p.y);
                    Scatterer { x, y, ..*p }
                })
                .collect(),
            footprint: self.footprint.iter().map(|&(x, y)| rot(x, y)).collect(),
            height_px: self.height_px,
        }
    }
}

pub(crate) fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn polygon_is_simple(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Per-axis phase ramp of one scatterer over the retained band, summed into
/// FFT bin order.
fn axis_response(n: usize, pos: f64, candidates: &[(i64, f64)]) -> Vec<Complex64> {
    let mut v = vec![Complex64::default(); n];
    for &(f, w) in candidates {
        let phase = -2.0 * std::f64::consts::PI * f as f64 * pos / n as f64;
        v[f.rem_euclid(n as i64) as usize] += Complex64::from_polar(w, phase);
    }
    v
}

/// Renders point scatterers directly in the spectral domain, band-limited and
/// windowed per `cfg`, and inverse-transforms to a `chip_size`² image.
pub fn synthesize_signature(
    scatterers: &ScattererSet,
    chip_size: usize,
    cfg: &SensorConfig,
) -> Result<ComplexRaster> {
    if chip_size < 16 {
        return Err(Error::config(format!("chip_size must be >= 16, got {chip_size}")));
    }
    scatterers.validate(chip_size)?;
    cfg.validate()?;
    let window = cfg.window.build()?;
    let n = chip_size;
    let rows = band_candidates(n, cfg.range_resolution_px, window.as_ref());
    let cols = band_candidates(n, cfg.crossrange_resolution_px, window.as_ref());

    let mut spectrum = vec![Complex64::default(); n * n];
    for s in &scatterers.scatterers {
        let ex = axis_response(n, s.x, &cols);
        let ey = axis_response(n, s.y, &rows);
        let a = Complex64::from_polar(s.amplitude, s.phase);
        for (ky, &vy) in ey.iter().enumerate() {
            if vy == Complex64::default() {
                continue;
            }
            let ay = a * vy;
            let row = &mut spectrum[ky * n..(ky + 1) * n];
            for (z, &vx) in row.iter_mut().zip(&ex) {
                *z += ay * vx;
            }
        }
    }
    fft2d(&mut spectrum, n, n, FftDirection::Inverse);
    Ok(to_raster(n, n, &spectrum))
}

/// Vertical extents `[y0, y1)` of the polygon interior along column `x`.
fn column_intervals(poly: &[(f64, f64)], x: f64) -> Vec<(f64, f64)> {
    let mut ys = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
        if x >= lo && x < hi {
            let t = (x - x0) / (x1 - x0);
            ys.push(y0 + t * (y1 - y0));
        }
    }
    ys.sort_by(f64::total_cmp);
    ys.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Target/shadow mask for the footprint rotated by `azimuth_deg` about the
/// chip centre. Pixels are sampled at their integer centres; the shadow is the
/// footprint swept `height_px` pixels down-range (+y), minus the footprint.
pub fn synthesize_shadow_mask(
    scatterers: &ScattererSet,
    chip_size: usize,
    azimuth_deg: f64,
) -> Result<Mask> {
    if polygon_area(&scatterers.footprint) < 1.0 {
        return Err(Error::config("degenerate footprint polygon (area < 1 px²)"));
    }
    let center = (chip_size / 2) as f64;
    let poly = scatterers.rotated(azimuth_deg, (center, center)).footprint;
    let h = scatterers.height_px.max(0.0);
    let mut mask = Mask::new(chip_size, chip_size);
    for x in 0..chip_size {
        let intervals = column_intervals(&poly, x as f64);
        if intervals.is_empty() {
            continue;
        }
        for y in 0..chip_size {
            let yf = y as f64;
            if intervals.iter().any(|&(a, b)| yf >= a && yf < b) {
                mask.set_unchecked(x, y, label::TARGET);
            } else if intervals.iter().any(|&(a, b)| yf >= a && yf < b + h) {
                mask.set_unchecked(x, y, label::SHADOW);
            }
        }
    }
    Ok(mask)
}
