use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patchwork::PatchworkConfig;
use crate::sensor::{AugmentationConfig, SensorConfig};
use crate::sim::{ChipLibraryConfig, ClutterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBackgrounds {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub clutter: ClutterConfig,
}

/// Either a directory of CF32 backgrounds or generated clutter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundSource {
    Dir(PathBuf),
    Synthetic(SyntheticBackgrounds),
}

/// Either a chip library on disk or one rendered on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipSource {
    Dir(PathBuf),
    Synthetic(ChipLibraryConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub bg_test_count: usize,
    pub chip_test_count: usize,
    /// Defaults to `train` for training streams, `test` otherwise.
    #[serde(default)]
    pub side: Option<Side>,
    /// Defaults to the manifest's master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub kind: String,
    pub count: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    #[serde(default)]
    pub backgrounds: Option<BackgroundSource>,
    #[serde(default)]
    pub chips: Option<ChipSource>,
    #[serde(default)]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub patchwork: Option<PatchworkConfig>,
    /// Scales each synthetic signature so that, after the scene's sensor
    /// function, its mean intensity over the −20 dB support sits this far
    /// above the background crop mean.
    #[serde(default)]
    pub target_scr_db: Option<f64>,
}

impl DatasetManifest {
    /// Parses a manifest and resolves relative asset paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        m.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(m)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(BackgroundSource::Dir(d)) = &mut self.backgrounds {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        if let Some(ChipSource::Dir(d)) = &mut self.chips {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
    }

    pub fn side(&self) -> Side {
        self.split.as_ref().and_then(|s| s.side).unwrap_or(if self.kind == "train_stream" {
            Side::Train
        } else {
            Side::Test
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.augmentation.validate()?;
        if let Some(BackgroundSource::Synthetic(b)) = &self.backgrounds {
            b.clutter.validate()?;
            if b.count == 0 || b.width < 64 || b.height < 64 {
                return Err(Error::config("synthetic backgrounds need count >= 1 and size >= 64"));
            }
        }
        if let Some(ChipSource::Synthetic(c)) = &self.chips {
            c.validate()?;
        }
        if let Some(p) = &self.patchwork {
            p.validate()?;
        }
        if let Some(scr) = self.target_scr_db {
            if !scr.is_finite() {
                return Err(Error::config("target_scr_db must be finite"));
            }
        }
        Ok(())
    }

    pub(crate) fn require_backgrounds(&self) -> Result<&BackgroundSource> {
        self.backgrounds
            .as_ref()
            .ok_or_else(|| Error::config(format!("kind {} needs \"backgrounds\"", self.kind)))
    }

    pub(crate) fn require_chips(&self) -> Result<&ChipSource> {
        self.chips
            .as_ref()
            .ok_or_else(|| Error::config(format!("kind {} needs \"chips\"", self.kind)))
    }
}
