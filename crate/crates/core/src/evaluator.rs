//! Detection scoring: greedy IoU matching, PR curves, AP@0.5, and the
//! two-test aggregation (average + absolute difference) used to pick a model.
//!
//! The AP rule is fixed and exactly specified: pool detections across
//! images, sort by descending confidence (stable on ties), build the
//! precision/recall table, apply the monotone precision envelope
//! (`p[i] ← max_{j≥i} p[j]`), and integrate over every recall step
//! (all-point interpolation). No confidence threshold is applied first:
//! thresholding is the detector's business, evaluation consumes everything.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{parse_detection_file, parse_label_file, BoundingBox, Detection, GroundTruth};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Averages within this distance count as tied in [`select_model`].
pub const SELECT_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AP undefined: dataset contains no ground-truth objects")]
    UndefinedAp,
    #[error("no reports to select from")]
    EmptyReports,
    #[error("report {model:?} lacks a test AP, cannot rank it")]
    IncompleteReport { model: String },
    #[error("{field} {value} outside [0,1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("failed reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    Annotation {
        path: String,
        #[source]
        source: crate::annotation::AnnotationError,
    },
}

/// IoU of two normalized boxes (identical to pixel-space IoU: both axes
/// rescale all areas by the same factor).
pub fn norm_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let half = |v: f64| v / 2.0;
    let (ax0, ax1) = (a.cx - half(a.w), a.cx + half(a.w));
    let (ay0, ay1) = (a.cy - half(a.h), a.cy + half(a.h));
    let (bx0, bx1) = (b.cx - half(b.w), b.cx + half(b.w));
    let (by0, by1) = (b.cy - half(b.h), b.cy + half(b.h));
    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = ix * iy;
    let union = a.w * a.h + b.w * b.h - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Verdict for one detection after matching, in descending-confidence order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMatch {
    /// Index into the input detection list.
    pub det_index: usize,
    pub class_id: u32,
    pub confidence: f64,
    pub is_tp: bool,
    /// Index of the matched ground truth, when `is_tp`.
    pub matched_gt: Option<usize>,
    /// IoU with the matched GT for TPs; best available IoU otherwise.
    pub iou: f64,
}

/// Matching result for one image (or one class slice of one image).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    /// Per-detection verdicts, sorted by descending confidence (ties keep
    /// input order).
    pub detections: Vec<DetectionMatch>,
    pub total_gts: usize,
    /// Ground truths no detection claimed (false negatives).
    pub unmatched_gts: usize,
}

/// Greedy matching: walk detections by descending confidence (stable on
/// ties); each claims the not-yet-matched ground truth of its class with the
/// highest IoU, provided that IoU reaches `iou_threshold`; otherwise it is a
/// false positive. Each ground truth is claimed at most once.
pub fn match_detections(gts: &[GroundTruth], dets: &[Detection], iou_threshold: f64) -> MatchOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.partial_cmp(&dets[a].confidence).unwrap_or(std::cmp::Ordering::Equal));

    let mut gt_taken = vec![false; gts.len()];
    let mut detections = Vec::with_capacity(dets.len());
    for det_index in order {
        let det = &dets[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] || gt.class_id != det.class_id {
                continue;
            }
            let iou = norm_iou(&det.bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, iou)) if iou >= iou_threshold => {
                gt_taken[gi] = true;
                detections.push(DetectionMatch {
                    det_index,
                    class_id: det.class_id,
                    confidence: det.confidence,
                    is_tp: true,
                    matched_gt: Some(gi),
                    iou,
                });
            }
            other => {
                detections.push(DetectionMatch {
                    det_index,
                    class_id: det.class_id,
                    confidence: det.confidence,
                    is_tp: false,
                    matched_gt: None,
                    iou: other.map_or(0.0, |(_, iou)| iou),
                });
            }
        }
    }
    let tp_count = detections.iter().filter(|d| d.is_tp).count();
    MatchOutcome { detections, total_gts: gts.len(), unmatched_gts: gts.len() - tp_count }
}

/// One point of a pooled PR table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Pool outcomes into the descending-confidence PR table. Within one
/// confidence value, pooling order (outcome order, then each outcome's own
/// order) is preserved.
pub fn pr_curve(outcomes: &[MatchOutcome]) -> (Vec<PrPoint>, usize) {
    let total_gt: usize = outcomes.iter().map(|o| o.total_gts).sum();
    let mut pooled: Vec<(f64, bool)> =
        outcomes.iter().flat_map(|o| o.detections.iter().map(|d| (d.confidence, d.is_tp))).collect();
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut points = Vec::with_capacity(pooled.len());
    let mut cum_tp = 0usize;
    for (i, (conf, is_tp)) in pooled.iter().enumerate() {
        if *is_tp {
            cum_tp += 1;
        }
        points.push(PrPoint {
            confidence: *conf,
            precision: cum_tp as f64 / (i + 1) as f64,
            recall: if total_gt == 0 { 0.0 } else { cum_tp as f64 / total_gt as f64 },
        });
    }
    (points, total_gt)
}

/// Area under the monotone-envelope PR curve (all-point interpolation).
/// Errors when the dataset has no ground-truth objects; a dataset with
/// objects but no detections scores 0.
pub fn average_precision(outcomes: &[MatchOutcome]) -> Result<f64, EvalError> {
    let (points, total_gt) = pr_curve(outcomes);
    if total_gt == 0 {
        return Err(EvalError::UndefinedAp);
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len() - 1).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (point, env_p) in points.iter().zip(&envelope) {
        ap += (point.recall - prev_recall) * env_p;
        prev_recall = point.recall;
    }
    Ok(ap)
}

/// mAP@0.5 over a dataset of (ground truths, detections) pairs: the mean of
/// per-class APs over every class holding at least one ground truth.
/// Detections of classes with no ground truth anywhere count toward no class
/// (standard single-class use reduces to plain AP of class 0).
pub fn map_at_05(dataset: &[(Vec<GroundTruth>, Vec<Detection>)]) -> Result<f64, EvalError> {
    map_at_threshold(dataset, DEFAULT_IOU_THRESHOLD)
}

/// [`map_at_05`] with an explicit IoU threshold.
pub fn map_at_threshold(
    dataset: &[(Vec<GroundTruth>, Vec<Detection>)],
    iou_threshold: f64,
) -> Result<f64, EvalError> {
    use rayon::prelude::*;
    let classes: BTreeSet<u32> =
        dataset.iter().flat_map(|(gts, _)| gts.iter().map(|g| g.class_id)).collect();
    if classes.is_empty() {
        return Err(EvalError::UndefinedAp);
    }
    let mut sum = 0.0;
    for class in &classes {
        let outcomes: Vec<MatchOutcome> = dataset
            .par_iter()
            .map(|(gts, dets)| {
                let cg: Vec<GroundTruth> = gts.iter().filter(|g| g.class_id == *class).cloned().collect();
                let cd: Vec<Detection> = dets.iter().filter(|d| d.class_id == *class).cloned().collect();
                match_detections(&cg, &cd, iou_threshold)
            })
            .collect();
        sum += average_precision(&outcomes)?;
    }
    Ok(sum / classes.len() as f64)
}

/// Evaluate a ground-truth/detection directory pair: `<stem>.txt` files in
/// `gt_dir` give the objects, `<stem>.det.txt` files in `det_dir` give the
/// predictions. A stem present on one side only contributes an empty list on
/// the other. Returns mAP@0.5.
pub fn evaluate_dirs(gt_dir: &Path, det_dir: &Path) -> Result<f64, EvalError> {
    let dataset = load_eval_dataset(gt_dir, det_dir)?;
    map_at_05(&dataset)
}

/// One image's ground truths paired with its detections.
pub type EvalPair = (Vec<GroundTruth>, Vec<Detection>);

/// Load the `<stem>.txt` / `<stem>.det.txt` pairing described in
/// [`evaluate_dirs`], stems sorted lexicographically.
pub fn load_eval_dataset(gt_dir: &Path, det_dir: &Path) -> Result<Vec<EvalPair>, EvalError> {
    let list = |dir: &Path| -> Result<Vec<String>, EvalError> {
        let rd = std::fs::read_dir(dir).map_err(|e| EvalError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        let mut names = Vec::new();
        for entry in rd {
            let entry = entry.map_err(|e| EvalError::Io {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?;
            if let Some(name) = entry.file_name().to_str() {
                names.push(name.to_string());
            }
        }
        Ok(names)
    };

    let mut stems: BTreeSet<String> = BTreeSet::new();
    for name in list(gt_dir)? {
        if let Some(stem) = name.strip_suffix(".txt") {
            if !stem.ends_with(".det") {
                stems.insert(stem.to_string());
            }
        }
    }
    for name in list(det_dir)? {
        if let Some(stem) = name.strip_suffix(".det.txt") {
            stems.insert(stem.to_string());
        }
    }

    let read_opt = |path: &Path| -> Result<Option<String>, EvalError> {
        if !path.exists() {
            return Ok(None);
        }
        std::fs::read_to_string(path)
            .map(Some)
            .map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })
    };

    let mut dataset = Vec::with_capacity(stems.len());
    for stem in stems {
        let gt_path = gt_dir.join(format!("{stem}.txt"));
        let det_path = det_dir.join(format!("{stem}.det.txt"));
        let gts = match read_opt(&gt_path)? {
            Some(text) => parse_label_file(&text, 1, 1).map_err(|source| EvalError::Annotation {
                path: gt_path.display().to_string(),
                source,
            })?,
            None => Vec::new(),
        };
        let dets = match read_opt(&det_path)? {
            Some(text) => parse_detection_file(&text, 1, 1).map_err(|source| EvalError::Annotation {
                path: det_path.display().to_string(),
                source,
            })?,
            None => Vec::new(),
        };
        dataset.push((gts, dets));
    }
    Ok(dataset)
}

/// Mean and absolute gap of the two test scores.
pub fn aggregate(test_normal_ap: f64, test_difficult_ap: f64) -> Result<(f64, f64), EvalError> {
    for (field, value) in [("test_normal_ap", test_normal_ap), ("test_difficult_ap", test_difficult_ap)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(EvalError::OutOfRange { field, value });
        }
    }
    Ok(((test_normal_ap + test_difficult_ap) / 2.0, (test_normal_ap - test_difficult_ap).abs()))
}

/// Scores of one model over the three evaluation datasets. The test average
/// and difference are always recomputed from the two test APs — they are
/// never stored, so a report can't carry inconsistent aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub val_ap: Option<f64>,
    pub test_normal_ap: Option<f64>,
    pub test_difficult_ap: Option<f64>,
}

impl EvalReport {
    pub fn test_average(&self) -> Option<f64> {
        Some((self.test_normal_ap? + self.test_difficult_ap?) / 2.0)
    }

    pub fn test_difference(&self) -> Option<f64> {
        Some((self.test_normal_ap? - self.test_difficult_ap?).abs())
    }
}

#[derive(Serialize, Deserialize)]
struct ReportWire {
    model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    val_ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    test_normal_ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    test_difficult_ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    test_average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    test_difference: Option<f64>,
}

impl Serialize for EvalReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ReportWire {
            model: self.model.clone(),
            val_ap: self.val_ap,
            test_normal_ap: self.test_normal_ap,
            test_difficult_ap: self.test_difficult_ap,
            test_average: self.test_average(),
            test_difference: self.test_difference(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EvalReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        // Stored aggregates are dropped on the floor: only the raw APs count.
        let wire = ReportWire::deserialize(deserializer)?;
        Ok(EvalReport {
            model: wire.model,
            val_ap: wire.val_ap,
            test_normal_ap: wire.test_normal_ap,
            test_difficult_ap: wire.test_difficult_ap,
        })
    }
}

/// Pick the winner: highest test average; averages tied within
/// [`SELECT_TIE_EPS`] fall back to the smallest test difference; remaining
/// ties keep the earliest report. Errors on an empty list or a report
/// missing either test AP.
pub fn select_model(reports: &[EvalReport]) -> Result<&EvalReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReports);
    }
    let mut scored = Vec::with_capacity(reports.len());
    for r in reports {
        let (avg, diff) = match (r.test_average(), r.test_difference()) {
            (Some(a), Some(d)) => (a, d),
            _ => return Err(EvalError::IncompleteReport { model: r.model.clone() }),
        };
        scored.push((avg, diff));
    }
    let max_avg = scored.iter().map(|(a, _)| *a).fold(f64::NEG_INFINITY, f64::max);
    let mut winner = None;
    for (i, (avg, diff)) in scored.iter().enumerate() {
        if *avg < max_avg - SELECT_TIE_EPS {
            continue;
        }
        match winner {
            None => winner = Some((i, *diff)),
            Some((_, best_diff)) if *diff < best_diff => winner = Some((i, *diff)),
            _ => {}
        }
    }
    Ok(&reports[winner.expect("non-empty scored list").0])
}

/// CSV mirror of the results-table layout, three decimals, one row per report.
pub fn report_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,ap_val,ap_test_normal,ap_test_difficult,test_average,test_difference\n");
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.3}"));
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.model,
            cell(r.val_ap),
            cell(r.test_normal_ap),
            cell(r.test_difficult_ap),
            cell(r.test_average()),
            cell(r.test_difference()),
        ));
    }
    out
}
