use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kinds::{scene_id, KindRegistry, SceneSource};
use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::formats::{encode_pgm, encode_raster, write_bytes};
use crate::metrics::to_jsonl;
use crate::overlay::SceneAnnotation;
use crate::raster::ComplexRaster;
use crate::sensor::{quarter_power_lut, DEFAULT_LUT_PERCENTILE};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const ECHO_FILE: &str = "manifest.echo.json";
pub const PROGRESS_EVERY: u64 = 100;

/// Called with `(done, total)` every [`PROGRESS_EVERY`] scenes.
pub type Progress<'a> = &'a (dyn Fn(u64, u64) + Sync);

#[derive(Clone, Copy)]
pub struct GenerateOptions<'a> {
    pub threads: usize,
    pub progress: Option<Progress<'a>>,
}

impl Default for GenerateOptions<'_> {
    fn default() -> Self {
        Self { threads: 1, progress: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scenes: u64,
    pub boxes: usize,
    pub content_hash: String,
}

/// SHA-256 over `(name, length, bytes)` of each file, names sorted.
pub fn content_hash(root: &Path, names: &[String]) -> Result<String> {
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort();
    let mut h = Sha256::new();
    for name in sorted {
        let path = root.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::config("thread count must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))
}

/// Generates `count` scenes with `scene` on a worker pool and writes
/// `scenes/NNNNNN.{cf32,pgm}` plus the annotation file under `out`.
pub fn write_scenes<F>(out: &Path, count: u64, opts: GenerateOptions<'_>, scene: F) -> Result<DatasetSummary>
where
    F: Fn(u64) -> Result<(ComplexRaster, SceneAnnotation)> + Sync,
{
    let scenes_dir = out.join("scenes");
    std::fs::create_dir_all(&scenes_dir).map_err(|e| Error::io(&scenes_dir, e))?;
    let done = AtomicU64::new(0);
    let results: Vec<Result<SceneAnnotation>> = pool(opts.threads)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let (img, ann) = scene(i)?;
                let id = scene_id(i);
                write_bytes(&scenes_dir.join(format!("{id}.cf32")), &encode_raster(&img))?;
                let gray = quarter_power_lut(&img, DEFAULT_LUT_PERCENTILE)?;
                write_bytes(&scenes_dir.join(format!("{id}.pgm")), &encode_pgm(&gray))?;
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(p) = opts.progress {
                    if n % PROGRESS_EVERY == 0 || n == count {
                        p(n, count);
                    }
                }
                Ok(ann)
            })
            .collect()
    });
    let annotations = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_bytes(&out.join(ANNOTATIONS_FILE), &to_jsonl(&annotations)?)?;

    let mut names = vec![ANNOTATIONS_FILE.to_string()];
    for i in 0..count {
        let id = scene_id(i);
        names.push(format!("scenes/{id}.cf32"));
        names.push(format!("scenes/{id}.pgm"));
    }
    Ok(DatasetSummary {
        scenes: count,
        boxes: annotations.iter().map(|a| a.boxes.len()).sum(),
        content_hash: content_hash(out, &names)?,
    })
}

/// Runs the manifest's kind end to end and writes the manifest echo.
pub fn generate_dataset(manifest: &DatasetManifest, out: &Path, opts: GenerateOptions<'_>) -> Result<DatasetSummary> {
    let source = KindRegistry::builtin().open(manifest)?;
    generate_from(source.as_ref(), manifest, out, opts)
}

pub fn generate_from(
    source: &dyn SceneSource,
    manifest: &DatasetManifest,
    out: &Path,
    opts: GenerateOptions<'_>,
) -> Result<DatasetSummary> {
    let summary = write_scenes(out, manifest.count, opts, |i| source.scene(i))?;
    let echo = serde_json::json!({
        "manifest": manifest,
        "scenes": summary.scenes,
        "boxes": summary.boxes,
        "content_hash": summary.content_hash,
    });
    let bytes = serde_json::to_vec_pretty(&echo).map_err(|e| Error::Internal(e.to_string()))?;
    write_bytes(&out.join(ECHO_FILE), &bytes)?;
    Ok(summary)
}

/// Endless, index-addressed training scenes starting at `start`.
pub struct SceneStream {
    source: Box<dyn SceneSource>,
    next: u64,
}

impl SceneStream {
    pub fn source(&self) -> &dyn SceneSource {
        self.source.as_ref()
    }
}

impl Iterator for SceneStream {
    type Item = Result<(ComplexRaster, SceneAnnotation)>;

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.next;
        self.next += 1;
        Some(self.source.scene(i))
    }
}

pub fn stream_scenes(manifest: &DatasetManifest, start: u64) -> Result<SceneStream> {
    if manifest.kind != "train_stream" {
        return Err(Error::config(format!(
            "scene streaming needs kind train_stream, got {}",
            manifest.kind
        )));
    }
    Ok(SceneStream {
        source: KindRegistry::builtin().open(manifest)?,
        next: start,
    })
}
