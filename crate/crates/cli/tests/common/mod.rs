#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use sarhybrid::dataset::{
    BackgroundSource, ChipSource, DatasetManifest, SplitConfig, SyntheticBackgrounds,
};
use sarhybrid::metrics::{to_jsonl, Prediction};
use sarhybrid::overlay::{SceneAnnotation, SceneBox};
use sarhybrid::sensor::{AugmentationConfig, SensorConfig, WindowSpec};
use sarhybrid::sim::{ChipLibraryConfig, ClutterConfig};
use sarhybrid::{BBox, Role, SeedSpec};

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarhybrid"))
        .args(args)
        .output()
        .expect("spawn sarhybrid")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "sarhybrid {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

pub fn read_summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

pub fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

pub fn annotation(scene_id: &str, boxes: &[(BBox, Role)]) -> SceneAnnotation {
    SceneAnnotation {
        scene_id: scene_id.into(),
        seed: SeedSpec::new(0, 0),
        sensor: None,
        augmentation: None,
        background_id: None,
        boxes: boxes
            .iter()
            .map(|&(bbox, role)| SceneBox { bbox, class: "obj".into(), role, asset_id: None })
            .collect(),
    }
}

pub fn prediction(scene_id: &str, bbox: BBox, confidence: f64) -> Prediction {
    Prediction { scene_id: scene_id.into(), bbox, confidence }
}

pub fn write_annotations(path: &Path, anns: &[SceneAnnotation]) {
    std::fs::write(path, to_jsonl(anns).unwrap()).unwrap();
}

pub fn write_preds(path: &Path, preds: &[Prediction]) {
    std::fs::write(path, to_jsonl(preds).unwrap()).unwrap();
}

/// Small synthetic-asset manifest: 6 backgrounds of 700², chips every 30°.
pub fn small_manifest(kind: &str, count: u64) -> DatasetManifest {
    DatasetManifest {
        kind: kind.into(),
        count,
        master_seed: 5,
        sensor: SensorConfig {
            range_resolution_px: 1.5,
            crossrange_resolution_px: 1.5,
            window: WindowSpec::default(),
            noise_sigma: 0.1,
        },
        augmentation: AugmentationConfig::default(),
        backgrounds: Some(BackgroundSource::Synthetic(SyntheticBackgrounds {
            count: 6,
            width: 700,
            height: 700,
            clutter: ClutterConfig::default(),
        })),
        chips: Some(ChipSource::Synthetic(ChipLibraryConfig {
            azimuth_step_deg: 30.0,
            depressions_deg: vec![15.0],
            ..Default::default()
        })),
        split: Some(SplitConfig { bg_test_count: 2, chip_test_count: 40, side: None, seed: None }),
        patchwork: None,
        target_scr_db: None,
    }
}
