//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_complex::Complex32;
use rand::Rng;

use common::*;
use sarhybrid::dataset::{make_split, SplitSpec};
use sarhybrid::metrics::{average_precision, pr_curve, GroundTruth, Prediction};
use sarhybrid::overlay::{erode, overlay_scene, place_targets, PlacedChip, DEFAULT_MAX_ATTEMPTS};
use sarhybrid::patchwork::{build_patchwork, PatchworkConfig};
use sarhybrid::sensor::{apply_sensor_function, SensorConfig, WindowSpec};
use sarhybrid::sim::{
    chip_poses, generate_chip_library, synthesize_clutter, ChipLibraryConfig, ClutterConfig,
    DISTRACTOR_CLASSES,
};
use sarhybrid::{derive_stream, label, BBox, ComplexRaster, Role, SeedSpec, TargetChip};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- metric oracle ----

fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    let area = |r: &BBox| (r.x_max - r.x_min) * (r.y_max - r.y_min);
    inter / (area(a) + area(b) - inter)
}

/// True positives among the predictions kept by a cut, matched from scratch.
fn oracle_tp(kept: &[&Prediction], gts: &[GroundTruth], thr: f64) -> usize {
    let mut sorted: Vec<&Prediction> = kept.to_vec();
    sorted.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap());
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for p in sorted {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] || gt.scene_id != p.scene_id {
                continue;
            }
            let v = oracle_iou(&p.bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v >= thr {
                used[g] = true;
                tp += 1;
            }
        }
    }
    tp
}

fn oracle_ap(preds: &[Prediction], gts: &[GroundTruth], thr: f64) -> f64 {
    let mut cuts: Vec<f64> = preds.iter().map(|p| p.confidence).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let pts: Vec<(f64, f64)> = cuts
        .iter()
        .map(|&t| {
            let kept: Vec<&Prediction> = preds.iter().filter(|p| p.confidence >= t).collect();
            let tp = oracle_tp(&kept, gts, thr) as f64;
            (tp / gts.len() as f64, tp / kept.len() as f64)
        })
        .collect();
    let mut recalls: Vec<f64> = pts.iter().map(|p| p.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let p = pts.iter().filter(|q| q.0 >= r).map(|q| q.1).fold(0.0, f64::max);
        ap += (r - prev) * p;
        prev = r;
    }
    ap
}

fn random_box(rng: &mut impl Rng) -> BBox {
    let (x, y) = (rng.random_range(0..8) as f64, rng.random_range(0..8) as f64);
    let (w, h) = (rng.random_range(1..6) as f64, rng.random_range(1..6) as f64);
    bbox(x, y, x + w, y + h)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = derive_stream(SeedSpec::new(2024, 0));
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..200 {
        let scenes = ["a", "b"];
        let n_gt = rng.random_range(1..=4);
        let n_pred = rng.random_range(0..=6);
        let gts: Vec<GroundTruth> = (0..n_gt)
            .map(|_| GroundTruth {
                scene_id: scenes[rng.random_range(0..2)].into(),
                bbox: random_box(&mut rng),
            })
            .collect();
        let preds: Vec<Prediction> = (0..n_pred)
            .map(|_| {
                let conf = rng.random_range(1..=5) as f64 / 5.0;
                prediction(scenes[rng.random_range(0..2)], random_box(&mut rng), conf)
            })
            .collect();
        for thr in [0.1, 0.25, 0.5] {
            let ap = average_precision(&pr_curve(&preds, &gts, thr).map_err(|e| e.to_string())?);
            worst = worst.max((ap - oracle_ap(&preds, &gts, thr)).abs());
            compared += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 5.0,
        format!("{compared} comparisons over 200 instances, max |diff| {worst:.2e}, {secs:.2} s"),
    )
}

// ---- operating points ----

fn operating_points() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut anns = Vec::new();
    let mut preds = Vec::new();
    for i in 0..5 {
        let id = format!("{i:06}");
        let x = 20.0 * i as f64;
        // GT 10x10, prediction 4x10 inside it: IoU = 40 / 100
        let gt = bbox(x, 0.0, x + 10.0, 10.0);
        let pr = bbox(x, 0.0, x + 4.0, 10.0);
        anns.push(annotation(&id, &[(gt, Role::Target)]));
        preds.push(prediction(&id, pr, 0.5 + 0.1 * i as f64));
    }
    let (gt, pr, out) = (dir.path().join("gt.jsonl"), dir.path().join("p.jsonl"), dir.path().join("r"));
    write_annotations(&gt, &anns);
    write_preds(&pr, &preds);
    let res = run(&["eval", "--preds", p(&pr), "--gt", p(&gt), "--iou", "0.25,0.5", "--out", p(&out)]);
    if !res.status.success() {
        return Err(format!("eval failed: {}", String::from_utf8_lossy(&res.stderr)));
    }
    let s = read_summary(&out);
    let (ap25, ap50) = (s["ap25"].as_f64(), s["ap50"].as_f64());
    check(
        ap25 == Some(1.0) && ap50 == Some(0.0) && s.get("iou25").is_some() && s.get("iou50").is_some(),
        format!("IoU 0.4 everywhere: ap25 {ap25:?}, ap50 {ap50:?}"),
    )
}

// ---- overlay ----

fn shadow_core(chip: &TargetChip) -> Vec<bool> {
    let m = &chip.shadow_mask;
    let shadow: Vec<bool> = m.labels().iter().map(|&l| l == label::SHADOW).collect();
    erode(&shadow, m.width(), m.height(), 3)
}

fn disjoint(a: &BBox, b: &BBox) -> bool {
    a.x_max <= b.x_min || b.x_max <= a.x_min || a.y_max <= b.y_min || b.y_max <= a.y_min
}

struct OverlayStats {
    outside_identical: bool,
    rects_disjoint: bool,
    core_mean: f64,
    core_px: usize,
    chips: usize,
}

fn overlay_run(chips: &[TargetChip], sensor: &SensorConfig, seed: u64) -> Result<OverlayStats, String> {
    let clutter = ClutterConfig::default();
    let mut st = OverlayStats { outside_identical: true, rects_disjoint: true, core_mean: 0.0, core_px: 0, chips: 0 };
    let mut core_sum = 0.0;
    for scene in 0..50u64 {
        let mut s = derive_stream(SeedSpec::new(seed, scene));
        let bg = synthesize_clutter(640, 640, &clutter, &mut s).map_err(|e| e.to_string())?;
        let n = s.random_range(1..=4);
        let picked: Vec<&TargetChip> = (0..n).map(|_| &chips[s.random_range(0..chips.len())]).collect();
        let sizes: Vec<(usize, usize)> = picked.iter().map(|c| c.dims()).collect();
        let places = place_targets((640, 640), &sizes, &mut s, DEFAULT_MAX_ATTEMPTS).map_err(|e| e.to_string())?;
        let placed: Vec<PlacedChip> = places
            .iter()
            .map(|pl| PlacedChip {
                chip: picked[pl.chip_index].clone(),
                origin: pl.origin,
                role: Role::Target,
                asset_id: None,
            })
            .collect();
        let out = overlay_scene(&bg, &placed, sensor, &mut s).map_err(|e| e.to_string())?;
        st.chips += placed.len();

        let rects = &out.chip_rects;
        for (i, a) in rects.iter().enumerate() {
            for b in &rects[i + 1..] {
                st.rects_disjoint &= disjoint(a, b);
            }
        }
        for y in 0..640 {
            for x in 0..640 {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = rects.iter().any(|r| fx > r.x_min && fx < r.x_max && fy > r.y_min && fy < r.y_max);
                if !inside && out.scene.get(x, y) != bg.get(x, y) {
                    st.outside_identical = false;
                }
            }
        }
        for pc in &placed {
            let core = shadow_core(&pc.chip);
            let w = pc.chip.shadow_mask.width();
            for (i, _) in core.iter().enumerate().filter(|(_, &k)| k) {
                let (x, y) = (i % w + pc.origin.0, i / w + pc.origin.1);
                core_sum += out.scene.get(x, y).norm_sqr() as f64;
                st.core_px += 1;
            }
        }
    }
    st.core_mean = core_sum / st.core_px as f64;
    Ok(st)
}

fn overlay_chips() -> Result<Vec<TargetChip>, String> {
    let cfg = ChipLibraryConfig { azimuth_step_deg: 45.0, depressions_deg: vec![15.0], ..Default::default() };
    generate_chip_library(&cfg).map_err(|e| e.to_string())
}

fn overlay_sensor_scene(chips: &[TargetChip]) -> Outcome {
    let sigma = 0.2;
    let sensor = SensorConfig {
        range_resolution_px: 1.5,
        crossrange_resolution_px: 1.5,
        window: WindowSpec::default(),
        noise_sigma: sigma,
    };
    let start = Instant::now();
    let st = overlay_run(chips, &sensor, 71)?;
    let secs = start.elapsed().as_secs_f64();
    let expected = 2.0 * sigma * sigma * sensor.noise_power_gain(640, 640).map_err(|e| e.to_string())?;
    let ratio = st.core_mean / expected;
    check(
        st.outside_identical && st.rects_disjoint && (0.9..=1.1).contains(&ratio) && secs < 30.0,
        format!(
            "50 scenes, {} chips: (a) outside identical {}, (b) core/(2σ²·G) = {ratio:.4} over {} px, (c) disjoint {}, {secs:.1} s",
            st.chips, st.outside_identical, st.core_px, st.rects_disjoint
        ),
    )
}

fn overlay_identity_sensor(chips: &[TargetChip]) -> Outcome {
    let sigma = 0.2;
    let sensor = SensorConfig { noise_sigma: sigma, ..SensorConfig::ideal() };
    let start = Instant::now();
    let st = overlay_run(chips, &sensor, 72)?;
    let secs = start.elapsed().as_secs_f64();
    let ratio = st.core_mean / (2.0 * sigma * sigma);
    check(
        st.outside_identical && st.rects_disjoint && (0.9..=1.1).contains(&ratio) && secs < 30.0,
        format!(
            "50 scenes, {} chips: (a) {}, (b) core/2σ² = {ratio:.4} over {} px, (c) {}, {secs:.1} s",
            st.chips, st.outside_identical, st.core_px, st.rects_disjoint
        ),
    )
}

// ---- patchwork ----

fn patchwork() -> Outcome {
    let cfg = PatchworkConfig { grid: (4, 4), vignette_size: 128, overlap: 16 };
    let c = Complex32::new(0.75, -1.25);
    let v = ComplexRaster::from_samples(128, 128, vec![c; 128 * 128]).unwrap();
    let (img, _) = build_patchwork(&vec![v; 16], &vec![Vec::new(); 16], &cfg).map_err(|e| e.to_string())?;
    let worst = img.samples().iter().map(|z| (z - c).norm() as f64 / c.norm() as f64).fold(0.0, f64::max);
    check(
        img.dims() == (464, 464) && worst <= 1e-6,
        format!("size {:?}, max relative deviation {worst:.2e}", img.dims()),
    )
}

// ---- sensor ----

/// `line` interpolated `factor`-fold by zero-padding its spectrum.
fn upsample(line: &[Complex32], factor: usize) -> Vec<f64> {
    let n = line.len();
    let tau = std::f64::consts::TAU;
    let spectrum: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            line.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, z)| {
                let a = -tau * (k * t) as f64 / n as f64;
                let (c, s) = (a.cos(), a.sin());
                (re + z.re as f64 * c - z.im as f64 * s, im + z.re as f64 * s + z.im as f64 * c)
            })
        })
        .collect();
    let m = n * factor;
    (0..m)
        .map(|t| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &(sr, si)) in spectrum.iter().enumerate() {
                let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let a = tau * f * t as f64 / m as f64;
                let (c, s) = (a.cos(), a.sin());
                re += sr * c - si * s;
                im += sr * s + si * c;
            }
            (re * re + im * im) / (n * n) as f64
        })
        .collect()
}

/// Width of the main lobe at half power, in original samples.
fn half_power_width(power: &[f64], factor: usize) -> f64 {
    let (peak_i, &peak) = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = peak / 2.0;
    let cross = |step: isize| {
        let mut i = peak_i as isize;
        loop {
            let j = i + step;
            let (a, b) = (power[i as usize], power[j as usize]);
            if b < half {
                return i as f64 + step as f64 * (a - half) / (a - b);
            }
            i = j;
        }
    };
    (cross(1) - cross(-1)) / factor as f64
}

fn sensor_resolution() -> Outcome {
    let n = 64;
    let factor = 16;
    let mut lines = Vec::new();
    let mut ok = true;
    for r in [1.5, 2.0, 3.0] {
        let cfg = SensorConfig {
            range_resolution_px: r,
            crossrange_resolution_px: r,
            window: WindowSpec::rectangular(),
            noise_sigma: 0.0,
        };
        let mut img = ComplexRaster::zeros(n, n);
        img.set(n / 2, n / 2, Complex32::new(1.0, 0.0));
        let out = apply_sensor_function(&img, &cfg).map_err(|e| e.to_string())?;
        let row: Vec<Complex32> = (0..n).map(|x| out.get(x, n / 2)).collect();
        let col: Vec<Complex32> = (0..n).map(|y| out.get(n / 2, y)).collect();
        let cross = half_power_width(&upsample(&row, factor), factor);
        let range = half_power_width(&upsample(&col, factor), factor);
        for w in [cross, range] {
            ok &= (w / r - 1.0).abs() <= 0.15;
        }
        lines.push(format!("r {r}: range {range:.3}, cross {cross:.3}"));
    }

    let mut s = derive_stream(SeedSpec::new(9, 0));
    let samples: Vec<Complex32> = (0..96 * 80)
        .map(|_| Complex32::new(s.random_range(-1.0..1.0), s.random_range(-1.0..1.0)))
        .collect();
    let img = ComplexRaster::from_samples(96, 80, samples).unwrap();
    let out = apply_sensor_function(&img, &SensorConfig::ideal()).map_err(|e| e.to_string())?;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in out.samples().iter().zip(img.samples()) {
        num += (a - b).norm_sqr() as f64;
        den += b.norm_sqr() as f64;
    }
    let rel = (num / den).sqrt();
    ok &= rel <= 1e-5;
    lines.push(format!("identity rel. error {rel:.2e}"));
    check(ok, lines.join("; "))
}

// ---- chip counts ----

fn chip_counts() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("chips.json");
    // full angular grid on small renders; the count does not depend on size
    std::fs::write(&cfg, r#"{"chip_size": 16, "template_scale": 0.25}"#).unwrap();
    let out = dir.path().join("lib");
    let res = run(&["gen-chips", "--config", p(&cfg), "--out", p(&out)]);
    if !res.status.success() {
        return Err(format!("gen-chips failed: {}", String::from_utf8_lossy(&res.stderr)));
    }
    let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
    let index_lines = std::fs::read_to_string(out.join("index.jsonl")).map_err(|e| e.to_string())?.lines().count();

    let sector = ChipLibraryConfig {
        classes: DISTRACTOR_CLASSES.iter().map(|s| s.to_string()).collect(),
        azimuth_step_deg: 5.0,
        azimuth_sector_deg: Some([0.0, 100.0]),
        depressions_deg: vec![15.0],
        ..Default::default()
    };
    let mut per_object: BTreeMap<String, usize> = BTreeMap::new();
    for pose in chip_poses(&sector).map_err(|e| e.to_string())? {
        *per_object.entry(pose.class_name).or_default() += 1;
    }
    check(
        stdout.contains("chips: 21600") && index_lines == 21600 && per_object.values().all(|&n| n == 21),
        format!("library {index_lines} chips; distractor sector {per_object:?}"),
    )
}

// ---- split ----

fn split_integrity() -> Outcome {
    let bgs: Vec<String> = (0..180).map(|i| format!("bg:{i:04}")).collect();
    let cfg = ChipLibraryConfig::default();
    let chips: Vec<(String, String)> = chip_poses(&cfg)
        .map_err(|e| e.to_string())?
        .into_iter()
        .enumerate()
        .map(|(i, pose)| (format!("chip:{i:06}"), pose.class_name))
        .collect();
    let class_of: BTreeMap<&str, &str> = chips.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut s = derive_stream(SeedSpec::domain(7, "split", 0));
    let sp: SplitSpec = make_split(&bgs, &chips, 20, 2160, 7, &mut s).map_err(|e| e.to_string())?;
    let classes = |ids: &[String]| ids.iter().map(|id| class_of[id.as_str()]).collect::<BTreeSet<_>>().len();
    let (ctr, cte) = (classes(&sp.chip_train), classes(&sp.chip_test));
    check(
        sp.background_train.len() == 160
            && sp.background_test.len() == 20
            && sp.chip_train.len() == 19440
            && sp.chip_test.len() == 2160
            && sp.is_disjoint()
            && ctr == 10
            && cte == 10,
        format!(
            "backgrounds {}/{}, chips {}/{}, disjoint {}, classes {ctr}/{cte}",
            sp.background_train.len(),
            sp.background_test.len(),
            sp.chip_train.len(),
            sp.chip_test.len(),
            sp.is_disjoint()
        ),
    )
}

// ---- determinism ----

fn content_hash(stdout: &str) -> Option<String> {
    stdout.lines().find_map(|l| l.strip_prefix("content_hash: ").map(str::to_string))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    write_json(&manifest, &small_manifest("synth_on_real", 100));
    let start = Instant::now();
    let mut hashes = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = dir.path().join(name);
        let res = run(&["gen-dataset", "--manifest", p(&manifest), "--out", p(&out), "--threads", threads]);
        if !res.status.success() {
            return Err(format!("gen-dataset failed: {}", String::from_utf8_lossy(&res.stderr)));
        }
        hashes.push(content_hash(&String::from_utf8_lossy(&res.stdout)));
    }
    let secs = start.elapsed().as_secs_f64();
    let same = hashes[0].is_some() && hashes.iter().all(|h| h == &hashes[0]);
    check(
        same && secs < 120.0,
        format!("3 runs of 100 scenes (threads 1, 1, 8): identical {same}, {secs:.1} s"),
    )
}

// ---- end-to-end ----

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut m = small_manifest("synth_on_real", 100);
    // CFAR settings were picked on seed 314; this seed was not looked at
    m.master_seed = 2718;
    m.target_scr_db = Some(10.0);
    let manifest = dir.path().join("m.json");
    write_json(&manifest, &m);
    let data = dir.path().join("data");
    let cfar = dir.path().join("cfar.json");
    // guard band wider than the largest target so it does not train on itself
    std::fs::write(
        &cfar,
        r#"{"guard_px": 16, "train_px": 8, "threshold_factor": 6.0, "merge_gap_px": 4, "min_area_px": 10}"#,
    )
    .unwrap();
    let preds = dir.path().join("preds.jsonl");
    let report = dir.path().join("report");
    let gt = data.join("annotations.jsonl");
    for args in [
        vec!["gen-dataset", "--manifest", p(&manifest), "--out", p(&data)],
        vec!["detect", "--in", p(&data), "--cfar", p(&cfar), "--out", p(&preds)],
        vec!["eval", "--preds", p(&preds), "--gt", p(&gt), "--out", p(&report)],
    ] {
        let res = run(&args);
        if !res.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&res.stderr)));
        }
    }
    let s = read_summary(&report);
    let ap25 = s["ap25"].as_f64().unwrap_or(f64::NAN);
    check(
        ap25 >= 0.5,
        format!(
            "100 scenes at 10 dB SCR: ap25 {ap25:.4} (tp {}, fp {}, fn {}), ap50 {:.4}",
            s["iou25"]["tp"], s["iou25"]["fp"], s["iou25"]["fn"], s["ap50"].as_f64().unwrap_or(f64::NAN)
        ),
    )
}

fn main() {
    let chips = overlay_chips();
    let with_chips = |f: fn(&[TargetChip]) -> Outcome| match &chips {
        Ok(c) => f(c),
        Err(e) => Err(format!("chip library: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("metric oracle equivalence", metric_oracle()),
        ("operating points", operating_points()),
        ("overlay correctness (scene sensor)", with_chips(overlay_sensor_scene)),
        ("overlay correctness (identity sensor)", with_chips(overlay_identity_sensor)),
        ("patchwork", patchwork()),
        ("sensor resolution", sensor_resolution()),
        ("chip-count arithmetic", chip_counts()),
        ("split integrity", split_integrity()),
        ("determinism", determinism()),
        ("end-to-end smoke", end_to_end()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
