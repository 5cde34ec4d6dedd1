//! Box matching, precision/recall curves and average precision.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::write_bytes;
use crate::overlay::SceneAnnotation;
use crate::raster::{BBox, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: String,
    #[serde(flatten)]
    pub bbox: BBox,
    pub confidence: f64,
}

impl Prediction {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Format(format!(
                "confidence {} outside [0, 1] for scene {}",
                self.confidence, self.scene_id
            )));
        }
        Ok(())
    }
}

/// A ground-truth box tied to its scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scene_id: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub prediction: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pairs: Vec<MatchPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Points sorted by descending confidence threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Prediction indices by descending confidence, ties in input order.
fn confidence_order(preds: &[Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    order
}

/// Per-scene greedy matcher; `assign` is called once per prediction in
/// processing order with the matched GT, if any.
struct Matcher<'a> {
    gts_by_scene: BTreeMap<&'a str, Vec<usize>>,
    gts: &'a [GroundTruth],
    taken: Vec<bool>,
    threshold: f64,
}

impl<'a> Matcher<'a> {
    fn new(gts: &'a [GroundTruth], threshold: f64) -> Self {
        let mut gts_by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in gts.iter().enumerate() {
            gts_by_scene.entry(g.scene_id.as_str()).or_default().push(i);
        }
        Self {
            gts_by_scene,
            gts,
            taken: vec![false; gts.len()],
            threshold,
        }
    }

    fn offer(&mut self, p: &Prediction) -> Option<(usize, f64)> {
        let cands = self.gts_by_scene.get(p.scene_id.as_str())?;
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            if self.taken[g] {
                continue;
            }
            let v = iou(&p.bbox, &self.gts[g].bbox);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        let (g, v) = best?;
        if v >= self.threshold {
            self.taken[g] = true;
            Some((g, v))
        } else {
            None
        }
    }
}

/// Greedy pair-exclusive matching, per scene, in descending confidence.
pub fn match_predictions(preds: &[Prediction], gts: &[GroundTruth], iou_threshold: f64) -> MatchOutcome {
    let mut m = Matcher::new(gts, iou_threshold);
    let mut out = MatchOutcome::default();
    for i in confidence_order(preds) {
        match m.offer(&preds[i]) {
            Some((g, v)) => {
                out.tp += 1;
                out.pairs.push(MatchPair { prediction: i, gt: g, iou: v });
            }
            None => out.fp += 1,
        }
    }
    out.fn_ = gts.len() - out.tp;
    out
}

/// Precision and recall at every distinct confidence threshold.
///
/// Because matching runs in descending confidence, the matching at a cut is
/// a prefix of the full matching and one pass suffices. With no predictions
/// the curve is the single conventional point (precision 1, recall 0).
pub fn pr_curve(preds: &[Prediction], gts: &[GroundTruth], iou_threshold: f64) -> Result<PrCurve> {
    if gts.is_empty() {
        return Err(Error::Evaluation(
            "no ground-truth boxes: recall is undefined (use distractor mode)".into(),
        ));
    }
    let n_gt = gts.len() as f64;
    if preds.is_empty() {
        return Ok(PrCurve {
            points: vec![PrPoint { threshold: 1.0, precision: 1.0, recall: 0.0 }],
        });
    }
    let order = confidence_order(preds);
    let mut m = Matcher::new(gts, iou_threshold);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if m.offer(&preds[i]).is_some() {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(k + 1)
            .is_none_or(|&j| preds[j].confidence != preds[i].confidence);
        if last_of_group {
            points.push(PrPoint {
                threshold: preds[i].confidence,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / n_gt,
            });
        }
    }
    Ok(PrCurve { points })
}

/// Area under the monotone precision envelope, summed over recall steps.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    let mut envelope = vec![0.0; pts.len()];
    let mut best: f64 = 0.0;
    for i in (0..pts.len()).rev() {
        best = best.max(pts[i].precision);
        envelope[i] = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, e) in pts.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * e;
        prev_recall = p.recall;
    }
    ap
}

/// `k/20` for `k = 1..=19`.
pub fn default_sweep_thresholds() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

pub fn ap_sweep(preds: &[Prediction], gts: &[GroundTruth], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::config(format!("IoU threshold {t} outside (0, 1)")));
            }
            Ok((t, average_precision(&pr_curve(preds, gts, t)?)))
        })
        .collect()
}

/// AP with distractor boxes as pseudo ground truth; low is good.
pub fn distractor_ap(preds: &[Prediction], distractors: &[GroundTruth], iou_threshold: f64) -> Result<f64> {
    if distractors.is_empty() {
        return Err(Error::Evaluation("no distractor boxes to evaluate against".into()));
    }
    Ok(average_precision(&pr_curve(preds, distractors, iou_threshold)?))
}

/// Boxes of the given role across all annotations.
pub fn ground_truth(annotations: &[SceneAnnotation], role: Role) -> Vec<GroundTruth> {
    annotations
        .iter()
        .flat_map(|a| {
            a.boxes_with_role(role).map(|b| GroundTruth {
                scene_id: a.scene_id.clone(),
                bbox: b.bbox,
            })
        })
        .collect()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Internal(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let preds: Vec<Prediction> = read_jsonl(path.as_ref())?;
    for p in &preds {
        p.validate()?;
    }
    Ok(preds)
}

pub fn write_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &to_jsonl(preds)?)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<SceneAnnotation>> {
    read_jsonl(path.as_ref())
}

pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in &curve.points {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    s
}

pub fn ap_sweep_csv(sweep: &[(f64, f64)]) -> String {
    let mut s = String::from("iou_threshold,ap\n");
    for (t, ap) in sweep {
        s.push_str(&format!("{t},{ap}\n"));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Standard,
    Distractor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub iou_threshold: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Everything the `eval` command reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub points: Vec<(OperatingPoint, PrCurve)>,
    pub sweep: Vec<(f64, f64)>,
}

/// `0.25` → `"25"`.
pub fn threshold_tag(t: f64) -> String {
    format!("{}", (t * 100.0).round() as i64)
}

pub fn evaluate(
    preds: &[Prediction],
    annotations: &[SceneAnnotation],
    iou_thresholds: &[f64],
    mode: EvalMode,
) -> Result<EvalReport> {
    let gts = match mode {
        EvalMode::Standard => ground_truth(annotations, Role::Target),
        EvalMode::Distractor => ground_truth(annotations, Role::Distractor),
    };
    if gts.is_empty() {
        return Err(Error::Evaluation(match mode {
            EvalMode::Standard => {
                "annotations hold no target boxes; evaluate them with --distractor".into()
            }
            EvalMode::Distractor => "annotations hold no distractor boxes".into(),
        }));
    }
    let mut points = Vec::new();
    for &t in iou_thresholds {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::config(format!("IoU threshold {t} outside (0, 1)")));
        }
        let curve = pr_curve(preds, &gts, t)?;
        let m = match_predictions(preds, &gts, t);
        points.push((
            OperatingPoint {
                iou_threshold: t,
                ap: average_precision(&curve),
                tp: m.tp,
                fp: m.fp,
                fn_: m.fn_,
            },
            curve,
        ));
    }
    let sweep = ap_sweep(preds, &gts, &default_sweep_thresholds())?;
    Ok(EvalReport { mode, points, sweep })
}

impl EvalReport {
    pub fn summary_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("mode".into(), serde_json::to_value(self.mode).unwrap_or_default());
        for (op, _) in &self.points {
            let tag = threshold_tag(op.iou_threshold);
            map.insert(format!("ap{tag}"), op.ap.into());
            map.insert(format!("iou{tag}"), serde_json::to_value(op).unwrap_or_default());
        }
        serde_json::Value::Object(map)
    }

    /// Writes `summary.json`, `ap_sweep.csv` and one `pr_curve_iouNN.csv`
    /// per operating point.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let summary = serde_json::to_vec_pretty(&self.summary_json())
            .map_err(|e| Error::Internal(e.to_string()))?;
        write_bytes(&dir.join("summary.json"), &summary)?;
        write_bytes(&dir.join("ap_sweep.csv"), ap_sweep_csv(&self.sweep).as_bytes())?;
        for (op, curve) in &self.points {
            let name = format!("pr_curve_iou{}.csv", threshold_tag(op.iou_threshold));
            write_bytes(&dir.join(name), pr_curve_csv(curve).as_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn pred(scene: &str, bbox: BBox, confidence: f64) -> Prediction {
        Prediction { scene_id: scene.into(), bbox, confidence }
    }

    fn gt(scene: &str, bbox: BBox) -> GroundTruth {
        GroundTruth { scene_id: scene.into(), bbox }
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(10.0, 0.0, 20.0, 10.0)), 0.0);
        assert!((iou(&a, &b(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn match_examples() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        let m = match_predictions(&[pred("s", g, 0.5)], &[gt("s", g)], 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));

        // IoU 0.6 and 0.7 against the same GT
        let p1 = pred("s", b(0.0, 0.0, 10.0, 6.0), 0.9);
        let p2 = pred("s", b(0.0, 0.0, 10.0, 7.0), 0.8);
        let m = match_predictions(&[p2.clone(), p1.clone()], &[gt("s", g)], 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
        assert_eq!(m.pairs[0].prediction, 1);
        assert!((m.pairs[0].iou - 0.6).abs() < 1e-12);

        let gts = vec![gt("s", g); 3];
        let m = match_predictions(&[], &gts, 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 3));
    }

    #[test]
    fn matching_is_per_scene() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        let m = match_predictions(&[pred("a", g, 0.9)], &[gt("b", g)], 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
    }

    fn three_pred_case() -> (Vec<Prediction>, Vec<GroundTruth>) {
        let g1 = b(0.0, 0.0, 10.0, 10.0);
        let g2 = b(20.0, 20.0, 30.0, 30.0);
        let preds = vec![
            pred("s", g1, 0.9),
            pred("s", b(50.0, 50.0, 60.0, 60.0), 0.8),
            pred("s", g2, 0.7),
        ];
        (preds, vec![gt("s", g1), gt("s", g2)])
    }

    #[test]
    fn pr_curve_hand_trace() {
        let (preds, gts) = three_pred_case();
        let c = pr_curve(&preds, &gts, 0.5).unwrap();
        let pr: Vec<(f64, f64)> = c.points.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(pr, vec![(1.0, 0.5), (0.5, 0.5), (2.0 / 3.0, 1.0)]);
        assert_eq!(c.points.iter().map(|p| p.threshold).collect::<Vec<_>>(), vec![0.9, 0.8, 0.7]);
        assert!((average_precision(&c) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pr_curve_edge_cases() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        let c = pr_curve(&[pred("s", g, 1.0)], &[gt("s", g)], 0.5).unwrap();
        assert_eq!((c.points[0].precision, c.points[0].recall), (1.0, 1.0));
        assert_eq!(average_precision(&c), 1.0);

        let far = b(100.0, 100.0, 110.0, 110.0);
        let c = pr_curve(&[pred("s", far, 0.9), pred("s", far, 0.3)], &[gt("s", g)], 0.5).unwrap();
        assert!(c.points.iter().all(|p| p.precision == 0.0));
        assert_eq!(average_precision(&c), 0.0);

        let c = pr_curve(&[], &[gt("s", g)], 0.5).unwrap();
        assert_eq!(average_precision(&c), 0.0);

        assert!(matches!(pr_curve(&[], &[], 0.5), Err(Error::Evaluation(_))));
    }

    #[test]
    fn tied_confidences_form_one_point() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        let far = b(100.0, 100.0, 110.0, 110.0);
        let c = pr_curve(&[pred("s", far, 0.5), pred("s", g, 0.5)], &[gt("s", g)], 0.5).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!((c.points[0].precision, c.points[0].recall), (0.5, 1.0));
    }

    #[test]
    fn distractor_examples() {
        let ds: Vec<GroundTruth> = (0..10)
            .map(|i| gt("s", b(20.0 * i as f64, 0.0, 20.0 * i as f64 + 10.0, 10.0)))
            .collect();
        assert_eq!(distractor_ap(&[], &ds, 0.5).unwrap(), 0.0);
        let all: Vec<Prediction> = ds.iter().map(|d| pred("s", d.bbox, 0.99)).collect();
        assert_eq!(distractor_ap(&all, &ds, 0.5).unwrap(), 1.0);
        let one = [pred("s", ds[3].bbox, 0.95)];
        assert!((distractor_ap(&one, &ds, 0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(distractor_ap(&one, &[], 0.5).is_err());
    }

    #[test]
    fn sweep_threshold_crossing() {
        // every prediction has IoU exactly 0.4 with its GT
        let mut preds = Vec::new();
        let mut gts = Vec::new();
        for i in 0..5 {
            let s = format!("s{i}");
            gts.push(gt(&s, b(0.0, 0.0, 10.0, 10.0)));
            preds.push(pred(&s, b(0.0, 0.0, 10.0, 4.0), 0.5 + 0.1 * i as f64));
        }
        for (t, ap) in ap_sweep(&preds, &gts, &default_sweep_thresholds()).unwrap() {
            assert_eq!(ap, if t <= 0.4 { 1.0 } else { 0.0 }, "t={t}");
        }
        let perfect: Vec<Prediction> = gts.iter().map(|g| pred(&g.scene_id, g.bbox, 1.0)).collect();
        assert!(ap_sweep(&perfect, &gts, &default_sweep_thresholds()).unwrap().iter().all(|x| x.1 == 1.0));
        assert!(ap_sweep(&perfect, &gts, &[1.0]).is_err());
    }

    #[test]
    fn csv_format() {
        let (preds, gts) = three_pred_case();
        let c = pr_curve(&preds, &gts, 0.5).unwrap();
        let csv = pr_curve_csv(&c);
        assert_eq!(csv.lines().next(), Some("threshold,precision,recall"));
        assert_eq!(csv.lines().nth(1), Some("0.9,1,0.5"));
        assert_eq!(ap_sweep_csv(&[(0.25, 0.5)]), "iou_threshold,ap\n0.25,0.5\n");
    }

    #[test]
    fn prediction_jsonl_shape() {
        let p = pred("000001", b(1.0, 2.0, 3.0, 4.0), 0.5);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"scene_id":"000001","x_min":1.0,"y_min":2.0,"x_max":3.0,"y_max":4.0,"confidence":0.5}"#);
        let bad = r#"{"scene_id":"a","x_min":1,"y_min":2,"x_max":3,"y_max":4,"confidence":1.5}"#;
        let p: Prediction = serde_json::from_str(bad).unwrap();
        assert!(p.validate().is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0u8..20, 0u8..20, 1u8..12, 1u8..12).prop_map(|(x, y, w, h)| {
            BBox::from_pixels(x as usize, y as usize, (x + w) as usize, (y + h) as usize)
        })
    }

    fn arb_case() -> impl Strategy<Value = (Vec<Prediction>, Vec<GroundTruth>)> {
        let scene = prop_oneof![Just("a"), Just("b")];
        let p = (scene.clone(), arb_box(), 0u8..=10)
            .prop_map(|(s, bx, c)| pred(s, bx, c as f64 / 10.0));
        let g = (scene, arb_box()).prop_map(|(s, bx)| gt(s, bx));
        (prop::collection::vec(p, 0..8), prop::collection::vec(g, 1..5))
    }

    proptest! {
        #[test]
        fn iou_symmetric(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(iou(&a, &c), iou(&c, &a));
            prop_assert_eq!(iou(&a, &a), 1.0);
            let v = iou(&a, &c);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn match_counts_consistent((preds, gts) in arb_case(), t in 0.05f64..0.95) {
            let m = match_predictions(&preds, &gts, t);
            prop_assert_eq!(m.tp + m.fn_, gts.len());
            prop_assert_eq!(m.tp + m.fp, preds.len());
            prop_assert_eq!(m.pairs.len(), m.tp);
        }

        #[test]
        fn curve_invariants((preds, gts) in arb_case(), t in 0.05f64..0.95) {
            let c = pr_curve(&preds, &gts, t).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].threshold > w[1].threshold);
                prop_assert!(w[0].recall <= w[1].recall);
            }
            for p in &c.points {
                prop_assert!((0.0..=1.0).contains(&p.precision));
                prop_assert!((0.0..=1.0).contains(&p.recall));
            }
            let ap = average_precision(&c);
            prop_assert!((0.0..=1.0).contains(&ap));
        }

        #[test]
        fn ap_invariant_to_confidence_scaling((preds, gts) in arb_case(), k in 0.01f64..=1.0) {
            let scaled: Vec<Prediction> = preds
                .iter()
                .map(|p| Prediction { confidence: p.confidence * k, ..p.clone() })
                .collect();
            let a = average_precision(&pr_curve(&preds, &gts, 0.5).unwrap());
            let b = average_precision(&pr_curve(&scaled, &gts, 0.5).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
