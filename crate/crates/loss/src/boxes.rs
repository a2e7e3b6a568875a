/// Axis-aligned bounding box in center format. Units are whatever the
/// caller uses, as long as both boxes of a comparison share them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

pub(crate) const ENCLOSE_EPS: f64 = 1e-9;

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    pub fn x1(&self) -> f64 {
        self.cx - self.w / 2.0
    }
    pub fn y1(&self) -> f64 {
        self.cy - self.h / 2.0
    }
    pub fn x2(&self) -> f64 {
        self.cx + self.w / 2.0
    }
    pub fn y2(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection over union; 0 by convention when both areas are 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2().min(b.x2()) - a.x1().max(b.x1())).max(0.0);
    let ih = (a.y2().min(b.y2()) - a.y1().max(b.y1())).max(0.0);
    let inter = iw * ih;
    // areas from the same edge differences as the intersection, so
    // coincident boxes give exactly inter == union and IoU == 1
    let area = |r: &BBox| (r.x2() - r.x1()) * (r.y2() - r.y1());
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// EIoU: IoU minus normalized center-distance, width and height penalties,
/// each divided by the corresponding squared dimension of the smallest
/// enclosing box.
pub fn eiou(pred: &BBox, tgt: &BBox) -> f64 {
    let base = iou(pred, tgt);
    let cw = pred.x2().max(tgt.x2()) - pred.x1().min(tgt.x1());
    let ch = pred.y2().max(tgt.y2()) - pred.y1().min(tgt.y1());
    let c2 = cw * cw + ch * ch;
    let center = (pred.cx - tgt.cx).powi(2) + (pred.cy - tgt.cy).powi(2);
    let wpen = (pred.w - tgt.w).powi(2);
    let hpen = (pred.h - tgt.h).powi(2);
    base - center / c2.max(ENCLOSE_EPS)
        - wpen / (cw * cw).max(ENCLOSE_EPS)
        - hpen / (ch * ch).max(ENCLOSE_EPS)
}

/// 1 − EIoU; zero exactly at coincident (positive-area) boxes.
pub fn eiou_loss(pred: &BBox, tgt: &BBox) -> f64 {
    1.0 - eiou(pred, tgt)
}

/// Sum of per-pair EIoU losses over the positive-sample match set.
pub fn regression_loss(matches: &[(BBox, BBox)]) -> f64 {
    matches.iter().map(|(p, t)| eiou_loss(p, t)).sum()
}
