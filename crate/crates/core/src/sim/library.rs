//! Chip libraries: one signature + mask per (class, depression, azimuth),
//! optionally paired with a "measured" vignette (the chip incrusted into a
//! small clutter patch) for the measured-target and patchwork datasets.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clutter::{synthesize_clutter, ClutterConfig};
use super::scatterer::{synthesize_shadow_mask, synthesize_signature};
use super::templates::{TemplateRegistry, VEHICLE_CLASSES};
use crate::error::{Error, Result};
use crate::formats::{read_mask, read_raster, write_mask, write_raster};
use crate::overlay::{overlay_scene, PlacedChip};
use crate::raster::{ComplexRaster, Role, TargetChip};
use crate::rng::{derive_stream, SeedSpec};
use crate::sensor::SensorConfig;

pub const INDEX_FILE: &str = "index.jsonl";

/// Azimuths at which chips are rendered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AzimuthGrid {
    /// `k·step` for `k = 0..360/step`.
    Full { step_deg: f64 },
    /// `start + k·step` up to and including `end`.
    Sector { start_deg: f64, end_deg: f64, step_deg: f64 },
}

fn whole_steps(span: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::config(format!("azimuth step must be > 0, got {step}")));
    }
    let n = span / step;
    let r = n.round();
    if (n - r).abs() > 1e-6 * r.max(1.0) {
        return Err(Error::config(format!(
            "azimuth span {span}° is not a whole number of {step}° steps"
        )));
    }
    Ok(r as usize)
}

impl AzimuthGrid {
    pub fn angles(&self) -> Result<Vec<f64>> {
        match *self {
            AzimuthGrid::Full { step_deg } => {
                let n = whole_steps(360.0, step_deg)?;
                Ok((0..n).map(|k| k as f64 * step_deg).collect())
            }
            AzimuthGrid::Sector { start_deg, end_deg, step_deg } => {
                let span = end_deg - start_deg;
                if !(span >= 0.0 && span < 360.0) {
                    return Err(Error::config(format!(
                        "azimuth sector [{start_deg}°, {end_deg}°] must span [0°, 360°)"
                    )));
                }
                let n = whole_steps(span, step_deg)?;
                Ok((0..=n).map(|k| start_deg + k as f64 * step_deg).collect())
            }
        }
    }
}

/// Clutter patch used to turn a chip into a measured-like vignette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VignetteConfig {
    #[serde(default)]
    pub clutter: ClutterConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
}

fn default_classes() -> Vec<String> {
    VEHICLE_CLASSES.iter().map(|s| s.to_string()).collect()
}
fn default_chip_size() -> usize {
    128
}
fn default_step() -> f64 {
    0.5
}
fn default_depressions() -> Vec<f64> {
    vec![15.0, 16.0, 17.0]
}
fn default_sensor() -> SensorConfig {
    SensorConfig::ideal()
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipLibraryConfig {
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    /// Extra templates, registered over the built-ins by name.
    #[serde(default)]
    pub templates: Vec<super::ObjectTemplate>,
    #[serde(default = "default_chip_size")]
    pub chip_size: usize,
    #[serde(default = "default_step")]
    pub azimuth_step_deg: f64,
    /// Inclusive `[start, end]`; the full circle when absent.
    #[serde(default)]
    pub azimuth_sector_deg: Option<[f64; 2]>,
    #[serde(default = "default_depressions")]
    pub depressions_deg: Vec<f64>,
    /// Sensor used to render signatures; scenes apply their own on top.
    #[serde(default = "default_sensor")]
    pub sensor: SensorConfig,
    #[serde(default = "one")]
    pub template_scale: f64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
    #[serde(default)]
    pub vignette: Option<VignetteConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ChipLibraryConfig {
    fn default() -> Self {
        Self {
            classes: default_classes(),
            templates: Vec::new(),
            chip_size: default_chip_size(),
            azimuth_step_deg: default_step(),
            azimuth_sector_deg: None,
            depressions_deg: default_depressions(),
            sensor: default_sensor(),
            template_scale: 1.0,
            amplitude_scale: 1.0,
            vignette: None,
            seed: 0,
        }
    }
}

impl ChipLibraryConfig {
    pub fn azimuth_grid(&self) -> AzimuthGrid {
        match self.azimuth_sector_deg {
            None => AzimuthGrid::Full { step_deg: self.azimuth_step_deg },
            Some([a, b]) => AzimuthGrid::Sector {
                start_deg: a,
                end_deg: b,
                step_deg: self.azimuth_step_deg,
            },
        }
    }

    pub fn registry(&self) -> TemplateRegistry {
        let mut reg = TemplateRegistry::builtin();
        for t in &self.templates {
            reg.register(t.clone());
        }
        reg
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("chip library needs at least one class"));
        }
        if self.depressions_deg.is_empty() {
            return Err(Error::config("chip library needs at least one depression"));
        }
        if self.chip_size < 16 {
            return Err(Error::config(format!("chip_size must be >= 16, got {}", self.chip_size)));
        }
        self.sensor.validate()?;
        if let Some(v) = &self.vignette {
            v.clutter.validate()?;
            v.sensor.validate()?;
        }
        let reg = self.registry();
        for c in &self.classes {
            reg.get(c)?;
        }
        self.azimuth_grid().angles()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipPose {
    pub class_name: String,
    pub role: Role,
    pub azimuth_deg: f64,
    pub depression_deg: f64,
}

/// Every pose of the library, ordered by class, depression, then azimuth.
pub fn chip_poses(cfg: &ChipLibraryConfig) -> Result<Vec<ChipPose>> {
    cfg.validate()?;
    let reg = cfg.registry();
    let angles = cfg.azimuth_grid().angles()?;
    let mut poses = Vec::with_capacity(cfg.classes.len() * cfg.depressions_deg.len() * angles.len());
    for class in &cfg.classes {
        let role = reg.get(class)?.role;
        for &dep in &cfg.depressions_deg {
            for &az in &angles {
                poses.push(ChipPose {
                    class_name: class.clone(),
                    role,
                    azimuth_deg: az,
                    depression_deg: dep,
                });
            }
        }
    }
    Ok(poses)
}

pub(crate) fn render_chip(cfg: &ChipLibraryConfig, reg: &TemplateRegistry, pose: &ChipPose) -> Result<TargetChip> {
    let n = cfg.chip_size;
    let base = reg.get(&pose.class_name)?.instantiate(
        n,
        pose.depression_deg,
        cfg.template_scale,
        cfg.amplitude_scale,
    )?;
    let c = (n / 2) as f64;
    let signature = synthesize_signature(&base.rotated(pose.azimuth_deg, (c, c)), n, &cfg.sensor)?;
    let mask = synthesize_shadow_mask(&base, n, pose.azimuth_deg)?;
    TargetChip::new(signature, mask, pose.class_name.clone(), pose.azimuth_deg, pose.depression_deg)
}

pub(crate) fn render_vignette(cfg: &VignetteConfig, chip: &TargetChip, seed: u64, index: u64) -> Result<ComplexRaster> {
    let (w, h) = chip.dims();
    let mut s = derive_stream(SeedSpec::domain(seed, "vignette", index));
    let patch = synthesize_clutter(w.max(64), h.max(64), &cfg.clutter, &mut s)?.crop(0, 0, w, h)?;
    let placed = [PlacedChip {
        chip: chip.clone(),
        origin: (0, 0),
        role: Role::Target,
        asset_id: None,
    }];
    Ok(overlay_scene(&patch, &placed, &cfg.sensor, &mut s)?.scene)
}

/// Renders every chip of the library in memory, in [`chip_poses`] order.
pub fn generate_chip_library(cfg: &ChipLibraryConfig) -> Result<Vec<TargetChip>> {
    let poses = chip_poses(cfg)?;
    let reg = cfg.registry();
    poses.par_iter().map(|p| render_chip(cfg, &reg, p)).collect()
}

/// One line of a library's `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipIndexEntry {
    pub id: u64,
    pub class: String,
    pub role: Role,
    pub azimuth_deg: f64,
    pub depression_deg: f64,
    pub width: usize,
    pub height: usize,
    pub signature: String,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<String>,
}

impl ChipIndexEntry {
    pub fn asset_id(&self) -> String {
        format!("chip:{:06}", self.id)
    }
}

/// Writes the library under `out` and returns its index.
pub fn build_chip_library(cfg: &ChipLibraryConfig, out: &Path) -> Result<Vec<ChipIndexEntry>> {
    let poses = chip_poses(cfg)?;
    let reg = cfg.registry();
    let chips_dir = out.join("chips");
    fs::create_dir_all(&chips_dir).map_err(|e| Error::io(&chips_dir, e))?;
    let entries: Vec<ChipIndexEntry> = poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let chip = render_chip(cfg, &reg, pose)?;
            let stem = format!("{i:06}");
            let signature = format!("chips/{stem}.cf32");
            let mask = format!("chips/{stem}.sfm");
            write_raster(&chip.signature, out.join(&signature))?;
            write_mask(&chip.shadow_mask, out.join(&mask))?;
            let measured = match &cfg.vignette {
                Some(v) => {
                    let name = format!("chips/{stem}.vig.cf32");
                    write_raster(&render_vignette(v, &chip, cfg.seed, i as u64)?, out.join(&name))?;
                    Some(name)
                }
                None => None,
            };
            Ok(ChipIndexEntry {
                id: i as u64,
                class: pose.class_name.clone(),
                role: pose.role,
                azimuth_deg: chip.azimuth_deg,
                depression_deg: pose.depression_deg,
                width: cfg.chip_size,
                height: cfg.chip_size,
                signature,
                mask,
                measured,
            })
        })
        .collect::<Result<_>>()?;
    let index_path = out.join(INDEX_FILE);
    let mut buf = Vec::new();
    for e in &entries {
        serde_json::to_writer(&mut buf, e).map_err(|e| Error::Internal(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(&index_path).map_err(|e| Error::io(&index_path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&index_path, e))?;
    Ok(entries)
}

/// A chip library on disk.
#[derive(Debug, Clone)]
pub struct ChipLibrary {
    root: PathBuf,
    entries: Vec<ChipIndexEntry>,
}

impl ChipLibrary {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let index = root.join(INDEX_FILE);
        let f = fs::File::open(&index).map_err(|e| Error::io(&index, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&index, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ChipIndexEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", index.display(), n + 1)))?;
            entries.push(e);
        }
        Ok(Self { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ChipIndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<TargetChip> {
        let e = &self.entries[i];
        let sig = read_raster(self.root.join(&e.signature))?;
        let mask = read_mask(self.root.join(&e.mask))?;
        TargetChip::new(sig, mask, e.class.clone(), e.azimuth_deg, e.depression_deg)
    }

    /// The measured-like vignette of entry `i`, if the library has them.
    pub fn load_measured(&self, i: usize) -> Result<Option<ComplexRaster>> {
        match &self.entries[i].measured {
            Some(p) => read_raster(self.root.join(p)).map(Some),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::label;

    fn small(classes: &[&str], step: f64, deps: &[f64]) -> ChipLibraryConfig {
        ChipLibraryConfig {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            chip_size: 32,
            azimuth_step_deg: step,
            depressions_deg: deps.to_vec(),
            template_scale: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn pose_counts() {
        assert_eq!(chip_poses(&ChipLibraryConfig::default()).unwrap().len(), 21600);
        assert_eq!(chip_poses(&small(&["T72"], 90.0, &[15.0])).unwrap().len(), 4);
        let mut d = small(&["house", "tree"], 5.0, &[15.0]);
        d.azimuth_sector_deg = Some([0.0, 100.0]);
        let poses = chip_poses(&d).unwrap();
        assert_eq!(poses.len(), 42);
        assert_eq!(poses.iter().filter(|p| p.class_name == "tree").count(), 21);
        assert!(poses.iter().all(|p| p.role == Role::Distractor));
        assert_eq!(poses[20].azimuth_deg, 100.0);
    }

    #[test]
    fn bad_steps_rejected() {
        for step in [0.7, 0.0, -1.0, f64::NAN] {
            assert!(matches!(chip_poses(&small(&["T72"], step, &[15.0])), Err(Error::Config(_))));
        }
        let mut d = small(&["tree"], 5.0, &[15.0]);
        d.azimuth_sector_deg = Some([0.0, 360.0]);
        assert!(chip_poses(&d).is_err());
        assert!(chip_poses(&small(&["nope"], 90.0, &[15.0])).is_err());
    }

    #[test]
    fn pose_order() {
        let poses = chip_poses(&small(&["T72", "D7"], 120.0, &[15.0, 17.0])).unwrap();
        let key: Vec<(String, f64, f64)> = poses
            .iter()
            .map(|p| (p.class_name.clone(), p.depression_deg, p.azimuth_deg))
            .collect();
        assert_eq!(key[0], ("T72".into(), 15.0, 0.0));
        assert_eq!(key[2], ("T72".into(), 15.0, 240.0));
        assert_eq!(key[3], ("T72".into(), 17.0, 0.0));
        assert_eq!(key[6], ("D7".into(), 15.0, 0.0));
    }

    #[test]
    fn full_turn_reproduces_zero_azimuth() {
        let cfg = small(&["BMP2"], 90.0, &[16.0]);
        let reg = cfg.registry();
        let pose = |az| ChipPose {
            class_name: "BMP2".into(),
            role: Role::Target,
            azimuth_deg: az,
            depression_deg: 16.0,
        };
        let a = render_chip(&cfg, &reg, &pose(0.0)).unwrap();
        let b = render_chip(&cfg, &reg, &pose(360.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chips_have_target_and_shadow() {
        let chips = generate_chip_library(&small(&["T62"], 90.0, &[15.0])).unwrap();
        assert_eq!(chips.len(), 4);
        for c in &chips {
            assert!(c.shadow_mask.count(label::TARGET) > 0);
            assert!(c.shadow_mask.count(label::SHADOW) > 0);
            assert!(c.signature.energy() > 0.0);
        }
    }

    #[test]
    fn library_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(&["T72", "tree"], 180.0, &[15.0]);
        cfg.chip_size = 64;
        cfg.vignette = Some(VignetteConfig {
            clutter: ClutterConfig::default(),
            sensor: SensorConfig { noise_sigma: 0.1, ..SensorConfig::default() },
        });
        let index = build_chip_library(&cfg, dir.path()).unwrap();
        assert_eq!(index.len(), 4);
        let lib = ChipLibrary::open(dir.path()).unwrap();
        assert_eq!(lib.entries(), &index[..]);
        let mem = generate_chip_library(&cfg).unwrap();
        for (i, chip) in mem.iter().enumerate() {
            assert_eq!(&lib.load(i).unwrap(), chip);
            let v = lib.load_measured(i).unwrap().unwrap();
            assert_eq!(v.dims(), (64, 64));
        }
        assert_eq!(lib.entries()[2].role, Role::Distractor);
        // rebuilding is byte-identical
        let dir2 = tempfile::tempdir().unwrap();
        build_chip_library(&cfg, dir2.path()).unwrap();
        for e in lib.entries() {
            for f in [&e.signature, &e.mask, e.measured.as_ref().unwrap()] {
                assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(dir2.path().join(f)).unwrap());
            }
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ChipLibraryConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ChipLibraryConfig::default());
        assert!(serde_json::from_str::<ChipLibraryConfig>(r#"{"azimuth_stepdeg": 1}"#).is_err());
    }
}
