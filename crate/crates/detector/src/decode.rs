use uwnet_data::{Detection, Image};
use uwnet_loss::{iou, BBox};
use uwnet_tensor::{Error, Result, Scalar, Tensor};

use crate::anchors::{AnchorSet, ANCHORS_PER_SCALE};
use crate::model::{images_to_batch, DetectorModel};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Clamp a box to the unit image, preserving the clamped corners.
fn clamp_box(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
    let x1 = (cx - w / 2.0).clamp(0.0, 1.0);
    let x2 = (cx + w / 2.0).clamp(0.0, 1.0);
    let y1 = (cy - h / 2.0).clamp(0.0, 1.0);
    let y2 = (cy + h / 2.0).clamp(0.0, 1.0);
    BBox::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)
}

/// Turns raw head maps into thresholded detections per image. Boxes are
/// normalized: cx = (2σ(tx) − 0.5 + col)/W, w = anchor_w·(2σ(tw))²;
/// score = σ(obj)·max_c σ(class_c); class = argmax (first on ties).
pub fn decode_predictions<T: Scalar>(
    raw: &[Tensor<T>; 3],
    anchors: &AnchorSet,
    num_classes: usize,
    conf_threshold: f64,
) -> Result<Vec<Vec<Detection>>> {
    if !(0.0..=1.0).contains(&conf_threshold) {
        return Err(Error::invalid("decode_predictions", "conf_threshold must be in [0, 1]"));
    }
    let fields = 5 + num_classes;
    let batch = raw[0].shape().n;
    let mut out: Vec<Vec<Detection>> = vec![Vec::new(); batch];
    for (s, map) in raw.iter().enumerate() {
        let shape = map.shape();
        if shape.c != ANCHORS_PER_SCALE * fields || shape.n != batch {
            return Err(Error::invalid(
                "decode_predictions",
                format!("head map {shape} does not fit {ANCHORS_PER_SCALE} anchors x {fields} fields"),
            ));
        }
        let data = map.data();
        for n in 0..shape.n {
            for a in 0..ANCHORS_PER_SCALE {
                let (aw, ah) = anchors.anchors[s][a];
                let base = a * fields;
                for row in 0..shape.h {
                    for col in 0..shape.w {
                        let at = |f: usize| data[shape.idx(n, base + f, row, col)].to_f64();
                        let obj = sigmoid(at(4));
                        let (mut class, mut best) = (0usize, f64::NEG_INFINITY);
                        for c in 0..num_classes {
                            let p = sigmoid(at(5 + c));
                            if p > best {
                                best = p;
                                class = c;
                            }
                        }
                        let score = obj * best;
                        if score < conf_threshold {
                            continue;
                        }
                        let cx = (2.0 * sigmoid(at(0)) - 0.5 + col as f64) / shape.w as f64;
                        let cy = (2.0 * sigmoid(at(1)) - 0.5 + row as f64) / shape.h as f64;
                        let w = aw * (2.0 * sigmoid(at(2))).powi(2);
                        let h = ah * (2.0 * sigmoid(at(3))).powi(2);
                        out[n].push(Detection { bbox: clamp_box(cx, cy, w, h), class, score });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Suppression priority: higher score, then larger area, then earlier
/// input position.
fn rank(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b].score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(dets[b].bbox.area().partial_cmp(&dets[a].bbox.area()).unwrap())
            .then(a.cmp(&b))
    });
    order
}

/// Class-wise greedy non-maximum suppression; survivors are returned in
/// priority order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::invalid("nms", "iou_threshold must be in [0, 1]"));
    }
    let order = rank(dets);
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            dets[k].class == dets[i].class && iou(&dets[k].bbox, &dets[i].bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept.into_iter().map(|i| dets[i].clone()).collect())
}

/// Eval-mode forward, decode, then per-image suppression. Deterministic.
pub fn predict<T: Scalar>(
    model: &DetectorModel<T>,
    images: &[&Image],
    conf_threshold: f64,
    nms_threshold: f64,
) -> Result<Vec<Vec<Detection>>> {
    let mut out = Vec::with_capacity(images.len());
    // bounded batches keep the retained forward graph small
    for chunk in images.chunks(8) {
        let x = images_to_batch::<T>(chunk)?;
        let raw = model.forward(&x, false)?;
        for dets in decode_predictions(&raw, &model.anchors, model.num_classes, conf_threshold)? {
            out.push(nms(&dets, nms_threshold)?);
        }
    }
    Ok(out)
}
