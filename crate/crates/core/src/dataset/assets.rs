use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use super::manifest::{BackgroundSource, ChipSource, SyntheticBackgrounds};
use crate::error::{Error, Result};
use crate::formats::read_raster;
use crate::raster::{ComplexRaster, Role, TargetChip};
use crate::rng::{derive_stream, SeedSpec};
use crate::sim::{
    chip_poses, render_chip, render_vignette, synthesize_clutter, ChipLibrary, ChipLibraryConfig,
    ChipPose, TemplateRegistry,
};

enum BackgroundBackend {
    Files(Vec<PathBuf>),
    Synthetic {
        cfg: SyntheticBackgrounds,
        seed: u64,
        cache: Vec<OnceLock<std::result::Result<Arc<ComplexRaster>, String>>>,
    },
}

/// Backgrounds addressed by index, with stable string ids.
pub struct BackgroundPool {
    ids: Vec<String>,
    backend: BackgroundBackend,
}

impl BackgroundPool {
    pub fn open(src: &BackgroundSource, master_seed: u64) -> Result<Self> {
        match src {
            BackgroundSource::Dir(dir) => {
                let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
                let mut files = Vec::new();
                for entry in rd {
                    let p = entry.map_err(|e| Error::io(dir, e))?.path();
                    if p.extension().is_some_and(|e| e == "cf32") {
                        files.push(p);
                    }
                }
                files.sort();
                if files.is_empty() {
                    return Err(Error::io(
                        dir,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "no .cf32 backgrounds"),
                    ));
                }
                let ids = files
                    .iter()
                    .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                    .collect();
                Ok(Self { ids, backend: BackgroundBackend::Files(files) })
            }
            BackgroundSource::Synthetic(cfg) => Ok(Self {
                ids: (0..cfg.count).map(|i| format!("bg:{i:04}")).collect(),
                backend: BackgroundBackend::Synthetic {
                    cfg: cfg.clone(),
                    seed: master_seed,
                    cache: (0..cfg.count).map(|_| OnceLock::new()).collect(),
                },
            }),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<Arc<ComplexRaster>> {
        match &self.backend {
            BackgroundBackend::Files(files) => read_raster(&files[i]).map(Arc::new),
            BackgroundBackend::Synthetic { cfg, seed, cache } => cache[i]
                .get_or_init(|| {
                    let mut s = derive_stream(SeedSpec::domain(*seed, "background", i as u64));
                    synthesize_clutter(cfg.width, cfg.height, &cfg.clutter, &mut s)
                        .map(Arc::new)
                        .map_err(|e| e.to_string())
                })
                .clone()
                .map_err(Error::Internal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipMeta {
    pub asset_id: String,
    pub class: String,
    pub role: Role,
    pub has_measured: bool,
}

enum ChipBackend {
    Library(ChipLibrary),
    Synthetic {
        cfg: ChipLibraryConfig,
        poses: Vec<ChipPose>,
        registry: TemplateRegistry,
    },
}

/// Chips addressed by index; loaded or rendered on demand.
pub struct ChipPool {
    metas: Vec<ChipMeta>,
    backend: ChipBackend,
}

impl ChipPool {
    pub fn open(src: &ChipSource) -> Result<Self> {
        match src {
            ChipSource::Dir(dir) => {
                let lib = ChipLibrary::open(dir)?;
                let metas = lib
                    .entries()
                    .iter()
                    .map(|e| ChipMeta {
                        asset_id: e.asset_id(),
                        class: e.class.clone(),
                        role: e.role,
                        has_measured: e.measured.is_some(),
                    })
                    .collect();
                Ok(Self { metas, backend: ChipBackend::Library(lib) })
            }
            ChipSource::Synthetic(cfg) => {
                let poses = chip_poses(cfg)?;
                let metas = poses
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ChipMeta {
                        asset_id: format!("chip:{i:06}"),
                        class: p.class_name.clone(),
                        role: p.role,
                        has_measured: cfg.vignette.is_some(),
                    })
                    .collect();
                Ok(Self {
                    metas,
                    backend: ChipBackend::Synthetic {
                        registry: cfg.registry(),
                        cfg: cfg.clone(),
                        poses,
                    },
                })
            }
        }
    }

    pub fn metas(&self) -> &[ChipMeta] {
        &self.metas
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<TargetChip> {
        match &self.backend {
            ChipBackend::Library(lib) => lib.load(i),
            ChipBackend::Synthetic { cfg, poses, registry } => render_chip(cfg, registry, &poses[i]),
        }
    }

    pub fn load_measured(&self, i: usize) -> Result<ComplexRaster> {
        let missing = || {
            Error::config(format!(
                "chip {} has no measured vignette (build the library with \"vignette\")",
                self.metas[i].asset_id
            ))
        };
        match &self.backend {
            ChipBackend::Library(lib) => lib.load_measured(i)?.ok_or_else(missing),
            ChipBackend::Synthetic { cfg, .. } => {
                let v = cfg.vignette.as_ref().ok_or_else(missing)?;
                render_vignette(v, &self.load(i)?, cfg.seed, i as u64)
            }
        }
    }
}
