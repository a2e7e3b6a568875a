use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use uwnet_loss::{iou, BBox};

use crate::error::{Error, Result};

/// One predicted box with confidence score, in the same normalized
/// coordinate frame as the ground truth.
#[derive(Clone, Debug)]
pub struct Detection {
    pub bbox: BBox,
    pub class: usize,
    pub score: f64,
}

/// Precision-recall points for one class at one IoU threshold, ordered by
/// descending detection score (recall is non-decreasing along the curve).
#[derive(Clone, Debug, Default)]
pub struct PRCurve {
    pub points: Vec<(f64, f64)>,
}

/// Greedy matching outcome for one class: PR curve, all-points AP and the
/// final recall reached when every detection is admitted.
struct ClassEval {
    curve: PRCurve,
    ap: f64,
    max_recall: f64,
}

/// dets: (image index, box, score) for ONE class; gts likewise without
/// scores. Returns None when the class has no ground truth.
fn eval_class(dets: &[(usize, BBox, f64)], gts: &[(usize, BBox)], thresh: f64) -> Option<ClassEval> {
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].2.partial_cmp(&dets[a].2).unwrap().then(a.cmp(&b)));

    let mut matched = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut curve = PRCurve::default();
    for (rank, &di) in order.iter().enumerate() {
        let (img, dbox, _) = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, (gimg, gbox)) in gts.iter().enumerate() {
            if gimg != img || matched[gi] {
                continue;
            }
            let v = iou(dbox, gbox);
            if v >= thresh && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            matched[gi] = true;
            tp += 1;
        }
        let precision = tp as f64 / (rank + 1) as f64;
        let recall = tp as f64 / gts.len() as f64;
        curve.points.push((recall, precision));
    }

    // all-points interpolation: integrate recall steps against the
    // running maximum of precision from the right
    let mut ap = 0.0;
    let mut envelope = 0.0;
    let mut prev_recall = curve.points.last().map_or(0.0, |&(r, _)| r);
    for &(r, p) in curve.points.iter().rev() {
        // the segment (r, prev] sees only points at recall >= prev
        ap += (prev_recall - r) * envelope;
        envelope = envelope.max(p);
        prev_recall = r;
    }
    ap += prev_recall * envelope;

    let max_recall = curve.points.last().map_or(0.0, |&(r, _)| r);
    Some(ClassEval { curve, ap, max_recall })
}

/// AP for one class at one IoU threshold; None when the class is absent
/// from the ground truth.
pub fn average_precision(
    dets: &[(usize, BBox, f64)],
    gts: &[(usize, BBox)],
    iou_threshold: f64,
) -> Option<f64> {
    eval_class(dets, gts, iou_threshold).map(|e| e.ap)
}

pub fn pr_curve(
    dets: &[(usize, BBox, f64)],
    gts: &[(usize, BBox)],
    iou_threshold: f64,
) -> Option<PRCurve> {
    eval_class(dets, gts, iou_threshold).map(|e| e.curve)
}

/// Table-shaped evaluation summary for one model over one validation set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    /// AP at IoU 0.5 per class id; None when the class never occurs in
    /// the ground truth.
    pub per_class_ap: Vec<Option<f64>>,
    pub map50: f64,
    /// Mean over classes and IoU thresholds 0.5:0.05:0.95 of the maximum
    /// recall reached.
    pub mar: f64,
    pub images: usize,
    pub targets: usize,
}

pub const MAR_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// Per-class AP@0.5, their mean, and mAR over the threshold sweep.
pub fn evaluate(
    model: &str,
    predictions: &[Vec<Detection>],
    ground_truth: &[Vec<(BBox, usize)>],
    classes: usize,
) -> Result<MetricsReport> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::invalid(
            "evaluate",
            format!("{} prediction lists vs {} label lists", predictions.len(), ground_truth.len()),
        ));
    }
    for (img, (p, g)) in predictions.iter().zip(ground_truth).enumerate() {
        for d in p {
            if d.class >= classes {
                return Err(Error::invalid(
                    "evaluate",
                    format!("image {img}: predicted class {} out of range {classes}", d.class),
                ));
            }
        }
        for (_, c) in g {
            if *c >= classes {
                return Err(Error::invalid(
                    "evaluate",
                    format!("image {img}: label class {c} out of range {classes}"),
                ));
            }
        }
    }

    let mut per_class_dets: Vec<Vec<(usize, BBox, f64)>> = vec![Vec::new(); classes];
    let mut per_class_gts: Vec<Vec<(usize, BBox)>> = vec![Vec::new(); classes];
    for (img, dets) in predictions.iter().enumerate() {
        for d in dets {
            per_class_dets[d.class].push((img, d.bbox, d.score));
        }
    }
    let mut targets = 0;
    for (img, labels) in ground_truth.iter().enumerate() {
        for (b, c) in labels {
            per_class_gts[*c].push((img, *b));
            targets += 1;
        }
    }

    let mut per_class_ap = vec![None; classes];
    let mut present = 0usize;
    let mut ap_sum = 0.0;
    for c in 0..classes {
        if let Some(e) = eval_class(&per_class_dets[c], &per_class_gts[c], 0.5) {
            ap_sum += e.ap;
            present += 1;
            per_class_ap[c] = Some(e.ap);
        }
    }
    let map50 = if present == 0 { 0.0 } else { ap_sum / present as f64 };

    let mut mar_sum = 0.0;
    let mut mar_terms = 0usize;
    for &t in &MAR_THRESHOLDS {
        for c in 0..classes {
            if let Some(e) = eval_class(&per_class_dets[c], &per_class_gts[c], t) {
                mar_sum += e.max_recall;
                mar_terms += 1;
            }
        }
    }
    let mar = if mar_terms == 0 { 0.0 } else { mar_sum / mar_terms as f64 };

    Ok(MetricsReport {
        model: model.to_string(),
        per_class_ap,
        map50,
        mar,
        images: ground_truth.len(),
        targets,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Aligned-column CSV with one row per report: model, mAP, mAR, then AP
/// per class ("-" for absent classes).
pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let classes = reports.iter().map(|r| r.per_class_ap.len()).max().unwrap_or(0);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["model".to_string(), "mAP".to_string(), "mAR".to_string()];
    header.extend((0..classes).map(|c| format!("AP_c{c}")));
    rows.push(header);
    for r in reports {
        let mut row = vec![
            r.model.clone(),
            format!("{:.4}", r.map50),
            format!("{:.4}", r.mar),
        ];
        for c in 0..classes {
            row.push(match r.per_class_ap.get(c).copied().flatten() {
                Some(ap) => format!("{ap:.4}"),
                None => "-".to_string(),
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:>width$}", width = widths[i]))
            .collect();
        writeln!(out, "{}", line.join(", ")).unwrap();
    }
    out
}
