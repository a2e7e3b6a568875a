use std::collections::HashSet;

use uwnet_loss::BBox;
use uwnet_tensor::{Error, Result};

use crate::anchors::{AnchorSet, ANCHORS_PER_SCALE};

/// Reject anchors whose per-dimension size ratio to the box reaches this.
pub const RATIO_LIMIT: f64 = 4.0;

/// One ground truth mapped onto (scale, cell, anchor).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub gt_index: usize,
    pub scale: usize,
    /// (row, col) of the cell containing the box center.
    pub cell: (usize, usize),
    pub anchor: usize,
    pub bbox: BBox,
    pub class: usize,
}

/// Assignment outcome for one image: the positive set plus the indices of
/// ground truths left without a slot.
#[derive(Clone, Debug, Default)]
pub struct GridAssignment {
    pub positives: Vec<Assignment>,
    pub unmatched: Vec<usize>,
}

/// Worst per-dimension ratio between a box and an anchor; 1.0 is a
/// perfect prior, values >= RATIO_LIMIT disqualify it.
pub fn ratio_score(wh: (f64, f64), anchor: (f64, f64)) -> f64 {
    let rw = (wh.0 / anchor.0).max(anchor.0 / wh.0);
    let rh = (wh.1 / anchor.1).max(anchor.1 / wh.1);
    rw.max(rh)
}

/// Single best anchor per ground truth at the cell holding its center.
/// Ties pick the first (scale, anchor) in scan order; a (cell, anchor)
/// slot holds at most one ground truth, first come first served.
pub fn assign_targets(
    gt: &[(BBox, usize)],
    anchors: &AnchorSet,
    grids: [(usize, usize); 3],
) -> GridAssignment {
    let mut out = GridAssignment::default();
    let mut occupied: HashSet<(usize, usize, usize, usize)> = HashSet::new();
    for (gi, &(b, class)) in gt.iter().enumerate() {
        let mut best: Option<(usize, usize, f64)> = None;
        for (s, a, wh) in anchors.flat() {
            let r = ratio_score((b.w, b.h), wh);
            if r < RATIO_LIMIT && best.map_or(true, |(_, _, br)| r < br) {
                best = Some((s, a, r));
            }
        }
        let Some((s, a, _)) = best else {
            out.unmatched.push(gi);
            continue;
        };
        let (gh, gw) = grids[s];
        let col = ((b.cx * gw as f64).floor() as usize).min(gw - 1);
        let row = ((b.cy * gh as f64).floor() as usize).min(gh - 1);
        if !occupied.insert((s, row, col, a)) {
            out.unmatched.push(gi);
            continue;
        }
        out.positives.push(Assignment { gt_index: gi, scale: s, cell: (row, col), anchor: a, bbox: b, class });
    }
    out
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The raw (tx, ty, tw, th) whose decoding reproduces the box exactly:
/// the inverse of cx = (2σ(tx) − 0.5 + col)/W and w = aw·(2σ(tw))².
pub fn encode_target(
    b: &BBox,
    anchor: (f64, f64),
    cell: (usize, usize),
    grid: (usize, usize),
) -> Result<[f64; 4]> {
    let (gh, gw) = grid;
    let (row, col) = cell;
    let fx = b.cx * gw as f64 - col as f64;
    let fy = b.cy * gh as f64 - row as f64;
    let px = (fx + 0.5) / 2.0;
    let py = (fy + 0.5) / 2.0;
    let pw = (b.w / anchor.0).sqrt() / 2.0;
    let ph = (b.h / anchor.1).sqrt() / 2.0;
    for (v, what) in [(px, "x"), (py, "y"), (pw, "w"), (ph, "h")] {
        if !(0.0 < v && v < 1.0) {
            return Err(Error::invalid(
                "encode_target",
                format!("{what} target {v} not encodable: box outside cell or anchor ratio too large"),
            ));
        }
    }
    Ok([logit(px), logit(py), logit(pw), logit(ph)])
}

/// Head channel of field `f` (0..5+K) for anchor slot `a`.
pub fn head_channel(a: usize, f: usize, num_classes: usize) -> usize {
    debug_assert!(a < ANCHORS_PER_SCALE);
    a * (5 + num_classes) + f
}
