//! Built-in object templates: ten vehicle classes plus the house and tree
//! distractors. Geometry is procedural and fixed per class name.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scatterer::{polygon_area, Scatterer, ScattererSet};
use crate::error::{Error, Result};
use crate::raster::Role;
use crate::rng::{derive_stream, SeedSpec, Stream};

pub const VEHICLE_CLASSES: [&str; 10] = [
    "2S1", "BMP2", "BRDM2", "BTR60", "BTR70", "D7", "T62", "T72", "ZIL131", "ZSU23-4",
];

pub const DISTRACTOR_CLASSES: [&str; 2] = ["house", "tree"];

/// Object geometry in offsets from the chip centre, before rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    pub name: String,
    pub role: Role,
    pub scatterers: Vec<Scatterer>,
    pub footprint: Vec<(f64, f64)>,
    /// Object height; the shadow length is `height / tan(depression)`.
    pub physical_height_px: f64,
}

impl ObjectTemplate {
    /// Places the template at the centre of a `chip_size` chip, unrotated.
    pub fn instantiate(
        &self,
        chip_size: usize,
        depression_deg: f64,
        scale: f64,
        amplitude_scale: f64,
    ) -> Result<ScattererSet> {
        if !(depression_deg > 0.0 && depression_deg < 90.0) {
            return Err(Error::config(format!(
                "depression {depression_deg}° outside (0°, 90°)"
            )));
        }
        if !(scale > 0.0) || !(amplitude_scale >= 0.0) {
            return Err(Error::config("template scales must be positive"));
        }
        let c = (chip_size / 2) as f64;
        Ok(ScattererSet {
            scatterers: self
                .scatterers
                .iter()
                .map(|s| Scatterer {
                    x: c + s.x * scale,
                    y: c + s.y * scale,
                    amplitude: s.amplitude * amplitude_scale,
                    phase: s.phase,
                })
                .collect(),
            footprint: self
                .footprint
                .iter()
                .map(|&(x, y)| (c + x * scale, c + y * scale))
                .collect(),
            height_px: self.physical_height_px * scale / depression_deg.to_radians().tan(),
        })
    }

    pub fn footprint_area(&self) -> f64 {
        polygon_area(&self.footprint)
    }
}

fn uniform(s: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.random::<f64>()
}

fn vehicle(index: usize, name: &str) -> ObjectTemplate {
    let mut s = derive_stream(SeedSpec::domain(0, "template", index as u64));
    let length = uniform(&mut s, 20.0, 30.0);
    let width = uniform(&mut s, 10.0, 14.0);
    let count = s.random_range(12..=30usize);
    let (hl, hw) = (length / 2.0, width / 2.0);
    let strong = count * 3 / 10;
    let scatterers = (0..count)
        .map(|i| {
            let amplitude = if i < strong {
                uniform(&mut s, 0.7, 1.0)
            } else {
                uniform(&mut s, 0.2, 0.6)
            };
            Scatterer {
                x: uniform(&mut s, -hl + 1.0, hl - 1.0),
                y: uniform(&mut s, -hw + 1.0, hw - 1.0),
                amplitude,
                phase: uniform(&mut s, -std::f64::consts::PI, std::f64::consts::PI),
            }
        })
        .collect();
    ObjectTemplate {
        name: name.to_string(),
        role: Role::Target,
        scatterers,
        footprint: vec![(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)],
        physical_height_px: uniform(&mut s, 2.2, 3.2),
    }
}

fn house() -> ObjectTemplate {
    let mut s = derive_stream(SeedSpec::domain(0, "template", 100));
    let h = 11.0;
    let mut scatterers = Vec::new();
    // strong corner returns, weaker wall and roof returns
    for &(x, y) in &[(-h + 1.0, -h + 1.0), (h - 1.0, -h + 1.0), (h - 1.0, h - 1.0), (-h + 1.0, h - 1.0)] {
        scatterers.push(Scatterer { x, y, amplitude: 1.0, phase: uniform(&mut s, -3.0, 3.0) });
    }
    for k in 0..8 {
        let t = -h + 2.0 + (2.0 * h - 4.0) * (k % 4) as f64 / 3.0;
        let (x, y) = if k < 4 { (t, -h + 1.0) } else { (-h + 1.0, t) };
        scatterers.push(Scatterer { x, y, amplitude: 0.5, phase: uniform(&mut s, -3.0, 3.0) });
    }
    for _ in 0..6 {
        scatterers.push(Scatterer {
            x: uniform(&mut s, -h + 3.0, h - 3.0),
            y: uniform(&mut s, -h + 3.0, h - 3.0),
            amplitude: uniform(&mut s, 0.2, 0.4),
            phase: uniform(&mut s, -3.0, 3.0),
        });
    }
    ObjectTemplate {
        name: "house".into(),
        role: Role::Distractor,
        scatterers,
        footprint: vec![(-h, -h), (h, -h), (h, h), (-h, h)],
        physical_height_px: 5.0,
    }
}

fn tree() -> ObjectTemplate {
    let mut s = derive_stream(SeedSpec::domain(0, "template", 101));
    let radius = 7.0;
    let footprint = (0..16)
        .map(|k| {
            let t = k as f64 / 16.0 * std::f64::consts::TAU;
            (radius * t.cos(), radius * t.sin())
        })
        .collect();
    let scatterers = (0..25)
        .map(|_| {
            let r = (radius - 1.0) * s.random::<f64>().sqrt();
            let t = uniform(&mut s, 0.0, std::f64::consts::TAU);
            Scatterer {
                x: r * t.cos(),
                y: r * t.sin(),
                amplitude: uniform(&mut s, 0.1, 0.4),
                phase: uniform(&mut s, -3.0, 3.0),
            }
        })
        .collect();
    ObjectTemplate {
        name: "tree".into(),
        role: Role::Distractor,
        scatterers,
        footprint,
        physical_height_px: 4.5,
    }
}

/// Named object templates; built-ins can be overridden or extended.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, ObjectTemplate>,
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for (i, name) in VEHICLE_CLASSES.iter().enumerate() {
            templates.insert(name.to_string(), vehicle(i, name));
        }
        for t in [house(), tree()] {
            templates.insert(t.name.clone(), t);
        }
        Self { templates }
    }

    pub fn register(&mut self, template: ObjectTemplate) {
        self.templates.insert(template.name.clone(), template);
    }

    pub fn get(&self, name: &str) -> Result<&ObjectTemplate> {
        self.templates.get(name).ok_or_else(|| {
            Error::config(format!(
                "unknown object class {name:?} (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.templates.keys().map(String::as_str).collect()
    }
}
