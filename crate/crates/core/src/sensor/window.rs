//! Apodisation windows, registered by name.
//!
//! A window is described in configuration as `{"name": "taylor", "nbar": 4,
//! "sidelobe_db": 35}`; the registry turns that description into a
//! [`Window`] implementation. New tapers plug in with
//! [`WindowRegistry::register`].

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric taper defined on the normalised band position `u ∈ [-1/2, 1/2]`.
pub trait Window: Send + Sync {
    fn name(&self) -> &str;

    /// Unnormalised weight at `u`; the peak is at `u = 0`.
    fn taper(&self, u: f64) -> f64;

    /// Weight at `u` scaled so the peak is 1.
    fn normalized(&self, u: f64) -> f64 {
        self.taper(u.clamp(-0.5, 0.5)) / self.taper(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl WindowSpec {
    pub fn rectangular() -> Self {
        Self::named("rectangular")
    }

    pub fn hamming() -> Self {
        Self::named("hamming")
    }

    pub fn taylor(nbar: u32, sidelobe_db: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("nbar".to_string(), nbar as f64);
        params.insert("sidelobe_db".to_string(), sidelobe_db);
        Self {
            name: "taylor".into(),
            params,
        }
    }

    fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Window>> {
        WindowRegistry::builtin().build(self)
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self::taylor(4, 35.0)
    }
}

type WindowFactory = fn(&BTreeMap<String, f64>) -> Result<Box<dyn Window>>;

pub struct WindowRegistry {
    factories: HashMap<String, WindowFactory>,
}

impl WindowRegistry {
    pub fn empty() -> Self {
        Self {
            factories: HashMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("rectangular", |_| Ok(Box::new(Rectangular)));
        r.register("hamming", |_| Ok(Box::new(Hamming)));
        r.register("taylor", |p| {
            let nbar = p.get("nbar").copied().unwrap_or(4.0);
            let sll = p.get("sidelobe_db").copied().unwrap_or(35.0);
            Ok(Box::new(Taylor::new(nbar, sll)?))
        });
        r
    }

    /// Shared registry holding the built-in windows.
    pub fn builtin() -> &'static WindowRegistry {
        static REGISTRY: OnceLock<WindowRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_builtins)
    }

    pub fn register(&mut self, name: &str, factory: WindowFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.factories.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn build(&self, spec: &WindowSpec) -> Result<Box<dyn Window>> {
        let factory = self.factories.get(&spec.name).ok_or_else(|| {
            Error::config(format!(
                "unknown window {:?} (known: {})",
                spec.name,
                self.names().join(", ")
            ))
        })?;
        factory(&spec.params)
    }
}

pub struct Rectangular;

impl Window for Rectangular {
    fn name(&self) -> &str {
        "rectangular"
    }

    fn taper(&self, _u: f64) -> f64 {
        1.0
    }
}

pub struct Hamming;

impl Window for Hamming {
    fn name(&self) -> &str {
        "hamming"
    }

    fn taper(&self, u: f64) -> f64 {
        0.54 + 0.46 * (2.0 * PI * u).cos()
    }
}

/// Taylor window: `1 + 2 Σ F_m cos(2π m u)` over `m = 1..nbar-1`.
pub struct Taylor {
    coefficients: Vec<f64>,
}

impl Taylor {
    pub fn new(nbar: f64, sidelobe_db: f64) -> Result<Self> {
        if !(sidelobe_db > 0.0) || !sidelobe_db.is_finite() {
            return Err(Error::config(format!(
                "taylor sidelobe_db must be > 0, got {sidelobe_db}"
            )));
        }
        if nbar < 1.0 || nbar.fract() != 0.0 || nbar > 64.0 {
            return Err(Error::config(format!("taylor nbar must be an integer in [1, 64], got {nbar}")));
        }
        let nbar = nbar as usize;
        let b = 10f64.powf(sidelobe_db / 20.0);
        let a = b.acosh() / PI;
        let s2 = (nbar * nbar) as f64 / (a * a + (nbar as f64 - 0.5).powi(2));
        let ms: Vec<f64> = (1..nbar).map(|m| m as f64).collect();
        let coefficients = ms
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let m2 = m * m;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let numer: f64 = sign
                    * ms
                        .iter()
                        .map(|&j| 1.0 - m2 / s2 / (a * a + (j - 0.5).powi(2)))
                        .product::<f64>();
                let denom: f64 = 2.0
                    * ms
                        .iter()
                        .filter(|&&j| j != m)
                        .map(|&j| 1.0 - m2 / (j * j))
                        .product::<f64>();
                numer / denom
            })
            .collect();
        Ok(Self { coefficients })
    }
}

impl Window for Taylor {
    fn name(&self) -> &str {
        "taylor"
    }

    fn taper(&self, u: f64) -> f64 {
        1.0 + 2.0
            * self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, f)| f * (2.0 * PI * (i + 1) as f64 * u).cos())
                .sum::<f64>()
    }
}

/// Discrete, symmetric, peak-normalised window of `length` samples spanning
/// the full band (`u` from -1/2 to 1/2).
pub fn make_window(spec: &WindowSpec, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::config("window length must be >= 1"));
    }
    let window = spec.build()?;
    let raw: Vec<f64> = (0..length)
        .map(|n| {
            let u = if length == 1 {
                0.0
            } else {
                n as f64 / (length - 1) as f64 - 0.5
            };
            window.taper(u)
        })
        .collect();
    let peak = raw.iter().cloned().fold(f64::MIN, f64::max);
    Ok(raw.into_iter().map(|w| w / peak).collect())
}
