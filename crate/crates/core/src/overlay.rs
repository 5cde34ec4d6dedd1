//! Incrustation of target chips into clutter backgrounds.
//!
//! The composite runs five steps in a fixed order:
//!
//! 1. zero the background under every placed shadow;
//! 2. add complex thermal noise to that cut background and blur it with the
//!    sensor function, so the shadow holes fill with band-limited noise;
//! 3. paste the step-2 values back into a fresh copy of the original
//!    background, on shadow pixels only;
//! 4. band-limit each target signature with the sensor function and add it
//!    over its placement rectangle (measured chips replace pixels instead);
//! 5. the caller maps the complex scene through [`quarter_power_lut`].
//!
//! Every step only touches pixels inside placed chip rectangles, so the rest
//! of the scene is bit-identical to the input background.
//!
//! [`quarter_power_lut`]: crate::sensor::quarter_power_lut

use num_complex::Complex32;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{label, BBox, ComplexRaster, Mask, Role, TargetChip};
use crate::rng::{SeedSpec, Stream};
use crate::sensor::{add_thermal_noise, apply_sensor_function, AugmentationDraw, SensorConfig};

pub const DEFAULT_BBOX_THRESHOLD: f64 = 0.1;
pub const DEFAULT_MAX_ATTEMPTS: usize = 100;
/// Lower bound on the size of the "brightest points" set.
pub const MIN_BRIGHT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub chip_index: usize,
    pub origin: (usize, usize),
    pub chip_rect: BBox,
}

/// A chip ready to be composited at `origin`.
#[derive(Debug, Clone)]
pub struct PlacedChip {
    pub chip: TargetChip,
    pub origin: (usize, usize),
    pub role: Role,
    pub asset_id: Option<String>,
}

/// One labelled object in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBox {
    #[serde(flatten)]
    pub bbox: BBox,
    pub class: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_id: Option<String>,
}

/// Ground-truth record for one generated scene (one JSONL line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub seed: SeedSpec,
    #[serde(default)]
    pub sensor: Option<SensorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_id: Option<String>,
    pub boxes: Vec<SceneBox>,
}

impl SceneAnnotation {
    pub fn boxes_with_role(&self, role: Role) -> impl Iterator<Item = &SceneBox> {
        self.boxes.iter().filter(move |b| b.role == role)
    }
}

#[derive(Debug, Clone)]
pub struct OverlayOutput {
    pub scene: ComplexRaster,
    pub boxes: Vec<SceneBox>,
    pub chip_rects: Vec<BBox>,
}

/// Uniformly placed `size`×`size` window of `bg`.
pub fn crop_background(bg: &ComplexRaster, size: usize, stream: &mut Stream) -> Result<ComplexRaster> {
    let (w, h) = bg.dims();
    if w < size || h < size {
        return Err(Error::config(format!(
            "background {w}x{h} is smaller than crop size {size}"
        )));
    }
    let x0 = stream.random_range(0..=w - size);
    let y0 = stream.random_range(0..=h - size);
    bg.crop(x0, y0, size, size)
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    // guard against 0.1 * 30 = 3.0000000000000004
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Zeroes a random share of the chip's brightest pixels.
///
/// The bright set is the top `bright_fraction` of nonzero pixels by
/// magnitude (at least [`MIN_BRIGHT_POINTS`], ties by row-major index);
/// `⌈dropout_share·|set|⌉` members are chosen without replacement.
pub fn dropout_bright_points(
    chip: &TargetChip,
    bright_fraction: f64,
    dropout_share: f64,
    stream: &mut Stream,
) -> Result<TargetChip> {
    let mut ranked: Vec<(usize, f32)> = chip
        .signature
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    if ranked.is_empty() {
        return Err(Error::Annotation("chip has no nonzero pixels".into()));
    }
    let bright = ceil_count(bright_fraction, ranked.len())
        .max(MIN_BRIGHT_POINTS)
        .min(ranked.len());
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let drop = ceil_count(dropout_share, bright).min(bright);
    let mut out = chip.clone();
    if drop == 0 {
        return Ok(out);
    }
    let samples = out.signature.samples_mut();
    for k in sample(stream, bright, drop) {
        samples[ranked[k].0] = Complex32::new(0.0, 0.0);
    }
    Ok(out)
}

/// Rejection-samples non-overlapping origins for chips of the given sizes.
pub fn place_targets(
    scene_size: (usize, usize),
    chip_sizes: &[(usize, usize)],
    stream: &mut Stream,
    max_attempts: usize,
) -> Result<Vec<Placement>> {
    let (sw, sh) = scene_size;
    let mut placed: Vec<Placement> = Vec::with_capacity(chip_sizes.len());
    for (i, &(w, h)) in chip_sizes.iter().enumerate() {
        if w > sw || h > sh {
            return Err(Error::Placement(format!(
                "chip {i} ({w}x{h}) does not fit a {sw}x{sh} scene"
            )));
        }
        let mut found = None;
        for _ in 0..max_attempts {
            let x = stream.random_range(0..=sw - w);
            let y = stream.random_range(0..=sh - h);
            let rect = BBox::from_pixels(x, y, x + w, y + h);
            if placed.iter().all(|p| p.chip_rect.intersection_area(&rect) == 0.0) {
                found = Some(Placement {
                    chip_index: i,
                    origin: (x, y),
                    chip_rect: rect,
                });
                break;
            }
        }
        match found {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::Placement(format!(
                    "no free position for chip {i} of {} after {max_attempts} attempts",
                    chip_sizes.len()
                )))
            }
        }
    }
    Ok(placed)
}

/// Tight box over pixels with `|z| >= threshold_ratio · max|z|`.
pub fn compute_bbox(chip: &TargetChip, threshold_ratio: f64) -> Result<BBox> {
    signature_bbox(&chip.signature, threshold_ratio)
}

fn signature_bbox(sig: &ComplexRaster, threshold_ratio: f64) -> Result<BBox> {
    let peak = sig.samples().iter().map(|z| z.norm()).fold(0.0f32, f32::max);
    if peak <= 0.0 {
        return Err(Error::Annotation("chip signature has empty support".into()));
    }
    let thr = threshold_ratio as f32 * peak;
    let mut acc: Option<(usize, usize, usize, usize)> = None;
    for y in 0..sig.height() {
        for x in 0..sig.width() {
            if sig.get(x, y).norm() >= thr {
                acc = Some(match acc {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    let (x0, y0, x1, y1) = acc.ok_or_else(|| Error::Annotation("no pixel above threshold".into()))?;
    Ok(BBox::from_pixels(x0, y0, x1 + 1, y1 + 1))
}

/// What a layer contributes in step 4.
enum Contribution<'a> {
    /// Band-limited synthetic signature, complex-added over the chip rectangle.
    Add(ComplexRaster),
    /// Measured pixels that replace the scene where the mask says target.
    Replace(&'a ComplexRaster),
}

struct Layer<'a> {
    origin: (usize, usize),
    mask: &'a Mask,
    contribution: Contribution<'a>,
}

/// Which of steps 1-4 to execute; everything but `full()` exists for tests
/// that probe the role of each step.
#[derive(Debug, Clone, Copy)]
struct Steps {
    cut: bool,
}

impl Steps {
    fn full() -> Self {
        Self { cut: true }
    }
}

fn for_each_labelled(
    layer: &Layer<'_>,
    wanted: u8,
    mut f: impl FnMut(usize, usize, usize, usize),
) {
    let (ox, oy) = layer.origin;
    for y in 0..layer.mask.height() {
        for x in 0..layer.mask.width() {
            if layer.mask.get(x, y) == wanted {
                f(x, y, ox + x, oy + y);
            }
        }
    }
}

fn composite(
    bg: &ComplexRaster,
    layers: &[Layer<'_>],
    cfg: &SensorConfig,
    stream: &mut Stream,
    steps: Steps,
) -> Result<ComplexRaster> {
    let (sw, sh) = bg.dims();
    for l in layers {
        let (w, h) = l.mask.dims();
        if l.origin.0 + w > sw || l.origin.1 + h > sh {
            return Err(Error::Internal(format!(
                "layer {w}x{h}@{:?} exceeds scene {sw}x{sh}",
                l.origin
            )));
        }
        let contrib_dims = match &l.contribution {
            Contribution::Add(r) => r.dims(),
            Contribution::Replace(r) => r.dims(),
        };
        if contrib_dims != (w, h) {
            return Err(Error::Internal(format!(
                "layer image {contrib_dims:?} does not match mask {w}x{h}"
            )));
        }
    }
    if layers.is_empty() {
        return Ok(bg.clone());
    }

    // 1. cut the background out under the shadows
    let mut cut = bg.clone();
    if steps.cut {
        for l in layers {
            for_each_labelled(l, label::SHADOW, |_, _, sx, sy| {
                cut.set(sx, sy, Complex32::new(0.0, 0.0))
            });
        }
    }

    // 2. thermal noise, then blur the background into the holes
    let noisy = add_thermal_noise(&cut, cfg.noise_sigma, stream);
    let blurred = apply_sensor_function(&noisy, cfg)?;

    // 3. paste the noisy shadows into the original background
    let mut out = bg.clone();
    for l in layers {
        for_each_labelled(l, label::SHADOW, |_, _, sx, sy| {
            out.set(sx, sy, blurred.get(sx, sy))
        });
    }

    // 4. targets
    for l in layers {
        match &l.contribution {
            Contribution::Add(sig) => {
                let (ox, oy) = l.origin;
                for y in 0..sig.height() {
                    for x in 0..sig.width() {
                        let z = out.get(ox + x, oy + y) + sig.get(x, y);
                        out.set(ox + x, oy + y, z);
                    }
                }
            }
            Contribution::Replace(values) => {
                for_each_labelled(l, label::TARGET, |cx, cy, sx, sy| {
                    out.set(sx, sy, values.get(cx, cy))
                });
            }
        }
    }
    Ok(out)
}

fn overlay_scene_with(
    bg_crop: &ComplexRaster,
    placed: &[PlacedChip],
    cfg: &SensorConfig,
    stream: &mut Stream,
    steps: Steps,
) -> Result<OverlayOutput> {
    let mut boxes = Vec::with_capacity(placed.len());
    let mut chip_rects = Vec::with_capacity(placed.len());
    let mut layers = Vec::with_capacity(placed.len());
    for p in placed {
        let filtered = apply_sensor_function(&p.chip.signature, cfg)?;
        let (w, h) = filtered.dims();
        let (ox, oy) = p.origin;
        let bbox = signature_bbox(&filtered, DEFAULT_BBOX_THRESHOLD)?;
        boxes.push(SceneBox {
            bbox: bbox.translated(ox as f64, oy as f64),
            class: p.chip.class_name.clone(),
            role: p.role,
            asset_id: p.asset_id.clone(),
        });
        chip_rects.push(BBox::from_pixels(ox, oy, ox + w, oy + h));
        layers.push(Layer {
            origin: p.origin,
            mask: &p.chip.shadow_mask,
            contribution: Contribution::Add(filtered),
        });
    }
    let scene = composite(bg_crop, &layers, cfg, stream, steps)?;
    Ok(OverlayOutput {
        scene,
        boxes,
        chip_rects,
    })
}

/// Composites synthetic chips into a background crop and labels them.
///
/// Boxes are computed on each chip after the sensor function, i.e. on the
/// signature as it appears in the scene.
pub fn overlay_scene(
    bg_crop: &ComplexRaster,
    placed: &[PlacedChip],
    cfg: &SensorConfig,
    stream: &mut Stream,
) -> Result<OverlayOutput> {
    overlay_scene_with(bg_crop, placed, cfg, stream, Steps::full())
}

/// A measured vignette with its 3-class segmentation.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredPlacement<'a> {
    pub image: &'a ComplexRaster,
    pub seg: &'a Mask,
    pub origin: (usize, usize),
}

/// Composites several measured chips. Target-labelled pixels replace the
/// scene; each box is the tight box over the target label, or `None` when the
/// segmentation has no target pixel.
pub fn overlay_measured(
    bg: &ComplexRaster,
    chips: &[MeasuredPlacement<'_>],
    cfg: &SensorConfig,
    stream: &mut Stream,
) -> Result<(ComplexRaster, Vec<Option<BBox>>)> {
    let mut layers = Vec::with_capacity(chips.len());
    let mut boxes = Vec::with_capacity(chips.len());
    for c in chips {
        if c.image.dims() != c.seg.dims() {
            return Err(Error::config(format!(
                "segmentation {:?} does not match chip {:?}",
                c.seg.dims(),
                c.image.dims()
            )));
        }
        boxes.push(
            c.seg
                .bbox_of(label::TARGET)
                .map(|b| b.translated(c.origin.0 as f64, c.origin.1 as f64)),
        );
        layers.push(Layer {
            origin: c.origin,
            mask: c.seg,
            contribution: Contribution::Replace(c.image),
        });
    }
    let scene = composite(bg, &layers, cfg, stream, Steps::full())?;
    Ok((scene, boxes))
}

/// Single measured chip; a segmentation without target pixels is an error.
pub fn overlay_measured_chip(
    chip_img: &ComplexRaster,
    seg: &Mask,
    bg: &ComplexRaster,
    origin: (usize, usize),
    cfg: &SensorConfig,
    stream: &mut Stream,
) -> Result<(ComplexRaster, BBox)> {
    if seg.count(label::TARGET) == 0 {
        return Err(Error::Annotation("segmentation has no target pixels".into()));
    }
    let (scene, boxes) = overlay_measured(
        bg,
        &[MeasuredPlacement {
            image: chip_img,
            seg,
            origin,
        }],
        cfg,
        stream,
    )?;
    let bbox = boxes[0].ok_or_else(|| Error::Internal("target box vanished".into()))?;
    Ok((scene, bbox))
}

/// Mask of pixels that keep all of their 7×7 neighbourhood inside `mask`
/// (square erosion by `radius`).
pub fn erode(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let r = radius as isize;
    let mut out = vec![false; mask.len()];
    for y in 0..height as isize {
        for x in 0..width as isize {
            if !mask[(y as usize) * width + x as usize] {
                continue;
            }
            let mut keep = true;
            'n: for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0
                        || ny < 0
                        || nx >= width as isize
                        || ny >= height as isize
                        || !mask[ny as usize * width + nx as usize]
                    {
                        keep = false;
                        break 'n;
                    }
                }
            }
            out[y as usize * width + x as usize] = keep;
        }
    }
    out
}
