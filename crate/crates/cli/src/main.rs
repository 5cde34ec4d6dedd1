use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use sarhybrid::dataset::{generate_dataset, DatasetManifest, GenerateOptions};
use sarhybrid::detect::{DetectorRegistry, SceneImage};
use sarhybrid::formats::{read_pgm8, read_raster};
use sarhybrid::metrics::{evaluate, read_annotations, read_predictions, write_predictions, EvalMode};
use sarhybrid::sim::{build_chip_library, ChipLibraryConfig};
use sarhybrid::{Error, Result};

#[derive(Parser)]
#[command(name = "sarhybrid", version, about = "Hybrid SAR dataset synthesis and detection evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a chip library (signatures, shadow masks, index.jsonl).
    GenChips {
        /// Chip library JSON config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a dataset from a manifest and print its content hash.
    GenDataset {
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; the output does not depend on it.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run a detector over every scene of a dataset directory.
    Detect {
        /// Dataset directory (or its scenes/ subdirectory).
        #[arg(long = "in")]
        input: PathBuf,
        /// Detector JSON config; an optional "detector" key picks the
        /// detector (default ca_cfar).
        #[arg(long)]
        cfar: PathBuf,
        /// Prediction JSONL to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Score predictions against annotations.
    Eval {
        /// Prediction JSONL.
        #[arg(long)]
        preds: PathBuf,
        /// Annotation JSONL of the scored dataset.
        #[arg(long)]
        gt: PathBuf,
        /// Reporting IoU thresholds.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
        iou: Vec<f64>,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        /// Score against distractor boxes instead of targets.
        #[arg(long)]
        distractor: bool,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn gen_chips(config: &Path, out: &Path) -> Result<()> {
    let cfg: ChipLibraryConfig = read_json(config)?;
    let index = build_chip_library(&cfg, out)?;
    println!("chips: {}", index.len());
    println!("index: {}", out.join("index.jsonl").display());
    Ok(())
}

fn gen_dataset(manifest: &Path, out: &Path, threads: usize) -> Result<()> {
    let m = DatasetManifest::load(manifest)?;
    let progress = |done: u64, total: u64| eprintln!("generated {done}/{total} scenes");
    let summary = generate_dataset(&m, out, GenerateOptions { threads, progress: Some(&progress) })?;
    println!("scenes: {}", summary.scenes);
    println!("boxes: {}", summary.boxes);
    println!("content_hash: {}", summary.content_hash);
    Ok(())
}

/// Scene files to process, keyed by scene id; CF32 preferred over PGM.
fn scene_files(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    let dir = if input.join("scenes").is_dir() { input.join("scenes") } else { input.to_path_buf() };
    let by_ext = |ext: &str| -> Result<Vec<(String, PathBuf)>> {
        let mut v = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = entry.map_err(|e| Error::io(&dir, e))?.path();
            if p.extension().is_some_and(|e| e == ext) {
                let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                v.push((id, p));
            }
        }
        v.sort();
        Ok(v)
    };
    let cf32 = by_ext("cf32")?;
    if !cf32.is_empty() {
        return Ok(cf32);
    }
    by_ext("pgm")
}

fn detect(input: &Path, cfg_path: &Path, out: &Path, threads: usize) -> Result<()> {
    let mut cfg: serde_json::Value = read_json(cfg_path)?;
    let name = match cfg.as_object_mut().and_then(|o| o.remove("detector")) {
        Some(serde_json::Value::String(s)) => s,
        Some(other) => return Err(Error::config(format!("detector must be a string, got {other}"))),
        None => "ca_cfar".to_string(),
    };
    let detector = DetectorRegistry::builtin().build(&name, &cfg)?;
    let files = scene_files(input)?;
    if threads == 0 {
        return Err(Error::config("thread count must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let per_scene: Vec<Result<Vec<_>>> = pool.install(|| {
        files
            .par_iter()
            .map(|(id, path)| {
                if path.extension().is_some_and(|e| e == "cf32") {
                    detector.detect(SceneImage::Complex(&read_raster(path)?), id)
                } else {
                    detector.detect(SceneImage::Gray(&read_pgm8(path)?), id)
                }
            })
            .collect()
    });
    let mut preds = Vec::new();
    for p in per_scene {
        preds.extend(p?);
    }
    write_predictions(&preds, out)?;
    println!("scenes: {}", files.len());
    println!("predictions: {}", preds.len());
    Ok(())
}

fn eval(preds: &Path, gt: &Path, iou: &[f64], out: &Path, distractor: bool) -> Result<()> {
    let preds = read_predictions(preds)?;
    let anns = read_annotations(gt)?;
    let mode = if distractor { EvalMode::Distractor } else { EvalMode::Standard };
    let report = evaluate(&preds, &anns, iou, mode)?;
    report.write(out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report.summary_json()).map_err(|e| Error::Internal(e.to_string()))?
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenChips { config, out } => gen_chips(&config, &out),
        Command::GenDataset { manifest, out, threads } => gen_dataset(&manifest, &out, threads),
        Command::Detect { input, cfar, out, threads } => detect(&input, &cfar, &out, threads),
        Command::Eval { preds, gt, iou, out, distractor } => eval(&preds, &gt, &iou, &out, distractor),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
