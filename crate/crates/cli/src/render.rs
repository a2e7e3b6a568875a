use uwnet_data::{class_color, Detection, Image};
use uwnet_loss::{iou, BBox};

/// IoU below which a ground-truth box counts as missed and is drawn red.
pub const MISS_IOU: f64 = 0.5;
pub const MISS_COLOR: [f32; 3] = [1.0, 0.0, 0.0];

/// One-pixel rectangle perimeter at rounded pixel coordinates, clamped to
/// the frame.
pub fn draw_box(img: &mut Image, b: &BBox, color: [f32; 3]) {
    let (w, h) = (img.w, img.h);
    let px = |v: f64, n: usize| ((v * n as f64).round() as i64).clamp(0, n as i64 - 1) as usize;
    let (x1, x2) = (px(b.x1(), w), px(b.x2(), w));
    let (y1, y2) = (px(b.y1(), h), px(b.y2(), h));
    for x in x1..=x2 {
        for y in [y1, y2] {
            for c in 0..3 {
                img.set(c, y, x, color[c]);
            }
        }
    }
    for y in y1..=y2 {
        for x in [x1, x2] {
            for c in 0..3 {
                img.set(c, y, x, color[c]);
            }
        }
    }
}

/// Copies the image and draws every detection in its class color, then
/// every ground-truth box that no detection overlaps at IoU >= 0.5 in red.
pub fn render_detections(
    img: &Image,
    dets: &[Detection],
    gts: &[(BBox, usize)],
    classes: usize,
) -> Image {
    let mut out = img.clone();
    for d in dets {
        draw_box(&mut out, &d.bbox, class_color(d.class, classes));
    }
    for (gt, _class) in gts {
        let missed = dets.iter().all(|d| iou(&d.bbox, gt) < MISS_IOU);
        if missed {
            draw_box(&mut out, gt, MISS_COLOR);
        }
    }
    out
}
