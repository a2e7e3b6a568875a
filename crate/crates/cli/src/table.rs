use uwnet_data::{average_precision, pr_curve, Detection};
use uwnet_loss::BBox;

/// mAP and mean maximum recall at one IoU matching threshold, averaged
/// over the classes present in the ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub map: f64,
    pub mar: f64,
}

/// Per-threshold detection quality over a whole split.
pub fn threshold_sweep(
    predictions: &[Vec<Detection>],
    ground_truth: &[Vec<(BBox, usize)>],
    classes: usize,
    thresholds: &[f64],
) -> Vec<SweepRow> {
    let mut dets: Vec<Vec<(usize, BBox, f64)>> = vec![Vec::new(); classes];
    let mut gts: Vec<Vec<(usize, BBox)>> = vec![Vec::new(); classes];
    for (img, list) in predictions.iter().enumerate() {
        for d in list {
            if d.class < classes {
                dets[d.class].push((img, d.bbox, d.score));
            }
        }
    }
    for (img, list) in ground_truth.iter().enumerate() {
        for (b, c) in list {
            if *c < classes {
                gts[*c].push((img, *b));
            }
        }
    }

    thresholds
        .iter()
        .map(|&t| {
            let (mut ap_sum, mut rec_sum, mut present) = (0.0, 0.0, 0usize);
            for c in 0..classes {
                if let Some(ap) = average_precision(&dets[c], &gts[c], t) {
                    let curve = pr_curve(&dets[c], &gts[c], t).expect("same inputs as AP");
                    ap_sum += ap;
                    rec_sum += curve.points.last().map_or(0.0, |&(r, _)| r);
                    present += 1;
                }
            }
            let denom = present.max(1) as f64;
            SweepRow { threshold: t, map: ap_sum / denom, mar: rec_sum / denom }
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("iou_threshold,mAP,mAR\n");
    for r in rows {
        out.push_str(&format!("{:.2},{:.6},{:.6}\n", r.threshold, r.map, r.mar));
    }
    out
}
