//! Grids of vignettes blended with linear fades across overlap strips.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlay::SceneBox;
use crate::raster::{BBox, ComplexRaster};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchworkConfig {
    /// (rows, cols)
    pub grid: (usize, usize),
    pub vignette_size: usize,
    pub overlap: usize,
}

impl Default for PatchworkConfig {
    fn default() -> Self {
        Self {
            grid: (4, 4),
            vignette_size: 128,
            overlap: 16,
        }
    }
}

impl PatchworkConfig {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.grid;
        if rows == 0 || cols == 0 {
            return Err(Error::config("patchwork grid needs at least one row and column"));
        }
        let (v, o) = (self.vignette_size, self.overlap);
        if v == 0 || o >= v {
            return Err(Error::config(format!(
                "patchwork overlap {o} must be smaller than vignette size {v}"
            )));
        }
        // a vignette with ramps on both sides must not have them overlap
        if rows.max(cols) >= 3 && 2 * o > v {
            return Err(Error::config(format!(
                "patchwork overlap {o} exceeds half the vignette size {v}"
            )));
        }
        Ok(())
    }

    pub fn output_size(&self) -> (usize, usize) {
        let (rows, cols) = self.grid;
        let step = self.vignette_size - self.overlap;
        (cols * step + self.overlap, rows * step + self.overlap)
    }

    pub fn cells(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    /// Top-left of the vignette at `(row, col)` in patchwork coordinates.
    pub fn offset(&self, row: usize, col: usize) -> (usize, usize) {
        let step = self.vignette_size - self.overlap;
        (col * step, row * step)
    }
}

/// Blend weight along one axis for the `index`-th of `count` vignettes at
/// local coordinate `x`. Interior strips ramp linearly; outer edges do not.
pub fn axis_weight(index: usize, count: usize, x: usize, v: usize, o: usize) -> f64 {
    let mut w = 1.0;
    if o == 0 {
        return w;
    }
    if index > 0 && x < o {
        w *= (x as f64 + 0.5) / o as f64;
    }
    if index + 1 < count && x >= v - o {
        w *= ((v - x) as f64 - 0.5) / o as f64;
    }
    w
}

/// Sum over all vignettes of `w(x)·w(y)` at every output pixel.
pub fn weight_field(cfg: &PatchworkConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (w, h) = cfg.output_size();
    let (rows, cols) = cfg.grid;
    let v = cfg.vignette_size;
    let mut field = vec![0.0; w * h];
    for r in 0..rows {
        for c in 0..cols {
            let (ox, oy) = cfg.offset(r, c);
            for y in 0..v {
                let wy = axis_weight(r, rows, y, v, cfg.overlap);
                for x in 0..v {
                    field[(oy + y) * w + ox + x] += wy * axis_weight(c, cols, x, v, cfg.overlap);
                }
            }
        }
    }
    Ok(field)
}

/// Blends `vignettes` (row-major, `rows·cols` of them) into one image and
/// translates each vignette's boxes into patchwork coordinates, keeping
/// their order.
pub fn build_patchwork(
    vignettes: &[ComplexRaster],
    boxes: &[Vec<BBox>],
    cfg: &PatchworkConfig,
) -> Result<(ComplexRaster, Vec<BBox>)> {
    cfg.validate()?;
    let (rows, cols) = cfg.grid;
    if vignettes.len() != rows * cols || boxes.len() != vignettes.len() {
        return Err(Error::config(format!(
            "patchwork grid {rows}x{cols} needs {} vignettes and box lists, got {} and {}",
            rows * cols,
            vignettes.len(),
            boxes.len()
        )));
    }
    let v = cfg.vignette_size;
    for (i, img) in vignettes.iter().enumerate() {
        if img.dims() != (v, v) {
            return Err(Error::config(format!(
                "vignette {i} is {:?}, expected {v}x{v}",
                img.dims()
            )));
        }
        for b in &boxes[i] {
            if !b.inside_scene(v, v) {
                return Err(Error::config(format!("box {b:?} outside vignette {i}")));
            }
        }
    }
    let (w, h) = cfg.output_size();
    let mut out = ComplexRaster::zeros(w, h);
    let mut out_boxes = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let (ox, oy) = cfg.offset(r, c);
            let img = &vignettes[i];
            for y in 0..v {
                let wy = axis_weight(r, rows, y, v, cfg.overlap);
                for x in 0..v {
                    let wxy = (wy * axis_weight(c, cols, x, v, cfg.overlap)) as f32;
                    let z = out.get(ox + x, oy + y) + img.get(x, y) * wxy;
                    out.set(ox + x, oy + y, z);
                }
            }
            out_boxes.extend(boxes[i].iter().map(|b| b.translated(ox as f64, oy as f64)));
        }
    }
    Ok((out, out_boxes))
}

/// A labelled vignette available for patchwork assembly.
#[derive(Debug, Clone)]
pub struct Vignette {
    pub image: ComplexRaster,
    pub boxes: Vec<SceneBox>,
}

/// One patchwork from vignettes drawn uniformly with replacement from a pool
/// of `pool_size`, fetched through `vignette`. Returns the image, its boxes,
/// and the pool indices used.
pub fn assemble_patchwork<F>(
    pool_size: usize,
    mut vignette: F,
    cfg: &PatchworkConfig,
    stream: &mut Stream,
) -> Result<(ComplexRaster, Vec<SceneBox>, Vec<usize>)>
where
    F: FnMut(usize) -> Result<Vignette>,
{
    if pool_size == 0 {
        return Err(Error::config("patchwork vignette pool is empty"));
    }
    let picks: Vec<usize> = (0..cfg.cells())
        .map(|_| stream.random_range(0..pool_size))
        .collect();
    let mut images = Vec::with_capacity(picks.len());
    let mut boxes = Vec::with_capacity(picks.len());
    let mut labels = Vec::new();
    for &k in &picks {
        let v = vignette(k)?;
        images.push(v.image);
        boxes.push(v.boxes.iter().map(|b| b.bbox).collect());
        labels.extend(v.boxes);
    }
    let (img, placed) = build_patchwork(&images, &boxes, cfg)?;
    let out = placed
        .into_iter()
        .zip(labels)
        .map(|(bbox, b)| SceneBox { bbox, ..b })
        .collect();
    Ok((img, out, picks))
}
