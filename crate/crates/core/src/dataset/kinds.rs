use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::Rng;

use super::assets::{BackgroundPool, ChipPool};
use super::manifest::{DatasetManifest, Side};
use super::split::{make_split, SplitSpec};
use crate::error::{Error, Result};
use crate::overlay::{
    compute_bbox, crop_background, dropout_bright_points, overlay_measured, overlay_scene,
    place_targets, MeasuredPlacement, PlacedChip, SceneAnnotation, SceneBox, DEFAULT_BBOX_THRESHOLD,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::patchwork::{assemble_patchwork, Vignette};
use crate::raster::{label, ComplexRaster, Role, TargetChip};
use crate::rng::{derive_stream, SeedSpec, Stream};
use crate::sensor::{apply_sensor_function, sample_augmentation, SensorConfig};

/// Index-addressed scene generator for one dataset kind.
pub trait SceneSource: Send + Sync {
    fn kind(&self) -> &str;
    fn scene(&self, index: u64) -> Result<(ComplexRaster, SceneAnnotation)>;
    fn split(&self) -> Option<&SplitSpec> {
        None
    }
}

pub type KindFactory = fn(&DatasetManifest) -> Result<Box<dyn SceneSource>>;

/// Dataset kinds by name.
#[derive(Clone)]
pub struct KindRegistry {
    factories: BTreeMap<String, KindFactory>,
}

impl KindRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("train_stream", |m| Ok(Box::new(Incrusted::open(m, Mode::Synthetic(Role::Target))?)));
        r.register("synth_on_real", |m| Ok(Box::new(Incrusted::open(m, Mode::Synthetic(Role::Target))?)));
        r.register("distractor", |m| Ok(Box::new(Incrusted::open(m, Mode::Synthetic(Role::Distractor))?)));
        r.register("measured_on_real", |m| Ok(Box::new(Incrusted::open(m, Mode::Measured)?)));
        r.register("patchwork", |m| Ok(Box::new(Patchworks::open(m)?)));
        r
    }

    pub fn builtin() -> &'static KindRegistry {
        static REG: OnceLock<KindRegistry> = OnceLock::new();
        REG.get_or_init(Self::with_builtins)
    }

    pub fn register(&mut self, name: &str, factory: KindFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn open(&self, manifest: &DatasetManifest) -> Result<Box<dyn SceneSource>> {
        manifest.validate()?;
        let f = self.factories.get(&manifest.kind).ok_or_else(|| {
            Error::config(format!(
                "unknown dataset kind {:?} (known: {})",
                manifest.kind,
                self.names().join(", ")
            ))
        })?;
        f(manifest)
    }
}

pub fn scene_id(index: u64) -> String {
    format!("{index:06}")
}

/// Chip indices of `role` on the manifest's side of the split, plus the
/// background indices on that side.
struct Selection {
    split: Option<SplitSpec>,
    chips: Vec<usize>,
    backgrounds: Vec<usize>,
}

fn select(
    m: &DatasetManifest,
    bgs: Option<&BackgroundPool>,
    chips: &ChipPool,
    role: Role,
    need_measured: bool,
) -> Result<Selection> {
    let chip_idx: Vec<usize> = (0..chips.len())
        .filter(|&i| chips.metas()[i].role == role && (!need_measured || chips.metas()[i].has_measured))
        .collect();
    if chip_idx.is_empty() {
        return Err(Error::config(format!(
            "chip source holds no {role:?} chips usable by kind {}",
            m.kind
        )));
    }
    let bg_ids: Vec<String> = bgs.map(|b| b.ids().to_vec()).unwrap_or_default();
    let Some(sc) = &m.split else {
        return Ok(Selection {
            split: None,
            chips: chip_idx,
            backgrounds: (0..bg_ids.len()).collect(),
        });
    };
    let seed = sc.seed.unwrap_or(m.master_seed);
    let pairs: Vec<(String, String)> = chip_idx
        .iter()
        .map(|&i| (chips.metas()[i].asset_id.clone(), chips.metas()[i].class.clone()))
        .collect();
    let mut s = derive_stream(SeedSpec::domain(seed, "split", 0));
    let split = make_split(&bg_ids, &pairs, sc.bg_test_count, sc.chip_test_count, seed, &mut s)?;
    let (bg_side, chip_side) = match m.side() {
        Side::Train => (&split.background_train, &split.chip_train),
        Side::Test => (&split.background_test, &split.chip_test),
    };
    let keep = |ids: &[String], all: &[String]| -> Vec<usize> {
        let set: std::collections::BTreeSet<&String> = ids.iter().collect();
        (0..all.len()).filter(|&i| set.contains(&all[i])).collect()
    };
    let chip_ids: Vec<String> = chips.metas().iter().map(|c| c.asset_id.clone()).collect();
    let chips_sel = keep(chip_side, &chip_ids);
    let mut backgrounds = keep(bg_side, &bg_ids);
    if backgrounds.is_empty() {
        // a zero-size background test side leaves the whole pool to training
        backgrounds = (0..bg_ids.len()).collect();
    }
    Ok(Selection { chips: chips_sel, backgrounds, split: Some(split) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Synthetic(Role),
    Measured,
}

/// Targets, distractors or measured chips incrusted into background crops.
struct Incrusted {
    manifest: DatasetManifest,
    mode: Mode,
    bgs: BackgroundPool,
    chips: ChipPool,
    sel: Selection,
}

/// Scales the signature so that, as imaged by `sensor`, its mean intensity
/// over the −20 dB support is `scr_db` above `clutter_mean`.
fn scale_to_scr(chip: &mut TargetChip, sensor: &SensorConfig, clutter_mean: f64, scr_db: f64) -> Result<()> {
    let imaged = apply_sensor_function(&chip.signature, sensor)?;
    let peak = imaged.samples().iter().map(|z| z.norm()).fold(0.0f32, f32::max) as f64;
    if peak <= 0.0 {
        return Ok(());
    }
    let thr = DEFAULT_BBOX_THRESHOLD * peak;
    let (mut sum, mut n) = (0.0, 0usize);
    for z in imaged.samples() {
        if z.norm() as f64 >= thr {
            sum += z.norm_sqr() as f64;
            n += 1;
        }
    }
    let support_mean = sum / n as f64;
    let k = (10f64.powf(scr_db / 10.0) * clutter_mean / support_mean).sqrt();
    chip.signature = chip.signature.scaled(k as f32);
    Ok(())
}

impl Incrusted {
    fn open(m: &DatasetManifest, mode: Mode) -> Result<Self> {
        let bgs = BackgroundPool::open(m.require_backgrounds()?, m.master_seed)?;
        let chips = ChipPool::open(m.require_chips()?)?;
        let role = match mode {
            Mode::Synthetic(r) => r,
            Mode::Measured => Role::Target,
        };
        let sel = select(m, Some(&bgs), &chips, role, mode == Mode::Measured)?;
        Ok(Self { manifest: m.clone(), mode, bgs, chips, sel })
    }

    fn generate(&self, index: u64, s: &mut Stream) -> Result<(ComplexRaster, SceneAnnotation)> {
        let m = &self.manifest;
        let aug = &m.augmentation;
        let bg_i = self.sel.backgrounds[s.random_range(0..self.sel.backgrounds.len())];
        let bg = self.bgs.load(bg_i)?;
        let crop = crop_background(&bg, aug.crop_size, s)?;
        let draw = sample_augmentation(aug, &m.sensor, s);
        let cfg = draw.apply_to(&m.sensor);
        let picks: Vec<usize> = (0..draw.n_targets)
            .map(|_| self.sel.chips[s.random_range(0..self.sel.chips.len())])
            .collect();

        let mut chips = Vec::with_capacity(picks.len());
        for &k in &picks {
            let mut chip = self.chips.load(k)?;
            if let Mode::Synthetic(_) = self.mode {
                chip = dropout_bright_points(&chip, aug.bright_fraction, aug.dropout_share, s)?;
                if let Some(scr) = m.target_scr_db {
                    scale_to_scr(&mut chip, &cfg, crop.mean_intensity(), scr)?;
                }
            }
            chips.push(chip);
        }
        let sizes: Vec<(usize, usize)> = chips.iter().map(|c| c.dims()).collect();
        let placements = place_targets(crop.dims(), &sizes, s, DEFAULT_MAX_ATTEMPTS)?;

        let (scene, boxes) = match self.mode {
            Mode::Synthetic(role) => {
                let placed: Vec<PlacedChip> = placements
                    .iter()
                    .zip(chips)
                    .zip(&picks)
                    .map(|((p, chip), &k)| PlacedChip {
                        chip,
                        origin: p.origin,
                        role,
                        asset_id: Some(self.chips.metas()[k].asset_id.clone()),
                    })
                    .collect();
                let out = overlay_scene(&crop, &placed, &cfg, s)?;
                (out.scene, out.boxes)
            }
            Mode::Measured => {
                let images = picks
                    .iter()
                    .map(|&k| self.chips.load_measured(k))
                    .collect::<Result<Vec<_>>>()?;
                let layers: Vec<MeasuredPlacement<'_>> = placements
                    .iter()
                    .zip(&images)
                    .zip(&chips)
                    .map(|((p, image), chip)| MeasuredPlacement {
                        image,
                        seg: &chip.shadow_mask,
                        origin: p.origin,
                    })
                    .collect();
                let (scene, bbs) = overlay_measured(&crop, &layers, &cfg, s)?;
                let boxes = bbs
                    .into_iter()
                    .zip(&picks)
                    .filter_map(|(b, &k)| {
                        let meta = &self.chips.metas()[k];
                        b.map(|bbox| SceneBox {
                            bbox,
                            class: meta.class.clone(),
                            role: Role::Target,
                            asset_id: Some(meta.asset_id.clone()),
                        })
                    })
                    .collect();
                (scene, boxes)
            }
        };
        Ok((
            scene,
            SceneAnnotation {
                scene_id: scene_id(index),
                seed: SeedSpec::new(m.master_seed, index),
                sensor: Some(cfg),
                augmentation: Some(draw),
                background_id: Some(self.bgs.ids()[bg_i].clone()),
                boxes,
            },
        ))
    }
}

impl SceneSource for Incrusted {
    fn kind(&self) -> &str {
        &self.manifest.kind
    }

    fn scene(&self, index: u64) -> Result<(ComplexRaster, SceneAnnotation)> {
        let mut s = derive_stream(SeedSpec::new(self.manifest.master_seed, index));
        self.generate(index, &mut s).map_err(|e| e.in_scene(index))
    }

    fn split(&self) -> Option<&SplitSpec> {
        self.sel.split.as_ref()
    }
}

/// Grids of measured (or, failing that, simulated) vignettes.
struct Patchworks {
    manifest: DatasetManifest,
    chips: ChipPool,
    sel: Selection,
}

impl Patchworks {
    fn open(m: &DatasetManifest) -> Result<Self> {
        let chips = ChipPool::open(m.require_chips()?)?;
        let sel = select(m, None, &chips, Role::Target, false)?;
        Ok(Self { manifest: m.clone(), chips, sel })
    }

    fn vignette(&self, k: usize) -> Result<Vignette> {
        let meta = &self.chips.metas()[k];
        let chip = self.chips.load(k)?;
        let (image, bbox) = if meta.has_measured {
            let image = self.chips.load_measured(k)?;
            let bbox = chip.shadow_mask.bbox_of(label::TARGET);
            (image, bbox)
        } else {
            let bbox = compute_bbox(&chip, DEFAULT_BBOX_THRESHOLD)?;
            (chip.signature, Some(bbox))
        };
        let boxes = bbox
            .map(|bbox| SceneBox {
                bbox,
                class: meta.class.clone(),
                role: Role::Target,
                asset_id: Some(meta.asset_id.clone()),
            })
            .into_iter()
            .collect();
        Ok(Vignette { image, boxes })
    }
}

impl SceneSource for Patchworks {
    fn kind(&self) -> &str {
        "patchwork"
    }

    fn scene(&self, index: u64) -> Result<(ComplexRaster, SceneAnnotation)> {
        let m = &self.manifest;
        let cfg = m.patchwork.clone().unwrap_or_default();
        let mut s = derive_stream(SeedSpec::new(m.master_seed, index));
        let (image, boxes, _) = assemble_patchwork(
            self.sel.chips.len(),
            |k| self.vignette(self.sel.chips[k]),
            &cfg,
            &mut s,
        )
        .map_err(|e| e.in_scene(index))?;
        Ok((
            image,
            SceneAnnotation {
                scene_id: scene_id(index),
                seed: SeedSpec::new(m.master_seed, index),
                sensor: None,
                augmentation: None,
                background_id: None,
                boxes,
            },
        ))
    }

    fn split(&self) -> Option<&SplitSpec> {
        self.sel.split.as_ref()
    }
}
