use uwnet_cli::render::{draw_box, render_detections, MISS_COLOR};
use uwnet_cli::table::{sweep_to_csv, threshold_sweep};
use uwnet_data::{class_color, Detection, Image};
use uwnet_loss::BBox;

fn pixel(img: &Image, y: usize, x: usize) -> [f32; 3] {
    [img.get(0, y, x), img.get(1, y, x), img.get(2, y, x)]
}

#[test]
fn draw_box_paints_exactly_the_rounded_perimeter() {
    let mut img = Image::new(32, 32);
    let b = BBox::new(0.5, 0.5, 0.5, 0.25);
    // corners round to x in [8, 24], y in [12, 20]
    draw_box(&mut img, &b, [1.0, 0.0, 0.0]);
    for x in 8..=24 {
        assert_eq!(pixel(&img, 12, x), [1.0, 0.0, 0.0]);
        assert_eq!(pixel(&img, 20, x), [1.0, 0.0, 0.0]);
    }
    for y in 12..=20 {
        assert_eq!(pixel(&img, y, 8), [1.0, 0.0, 0.0]);
        assert_eq!(pixel(&img, y, 24), [1.0, 0.0, 0.0]);
    }
    // interior and exterior untouched
    assert_eq!(pixel(&img, 16, 16), [0.0, 0.0, 0.0]);
    assert_eq!(pixel(&img, 11, 8), [0.0, 0.0, 0.0]);
    assert_eq!(pixel(&img, 12, 7), [0.0, 0.0, 0.0]);
}

#[test]
fn draw_box_clamps_to_the_frame() {
    let mut img = Image::new(16, 16);
    draw_box(&mut img, &BBox::new(0.0, 0.0, 0.8, 0.8), [0.0, 1.0, 0.0]);
    assert_eq!(pixel(&img, 0, 0), [0.0, 1.0, 0.0]);
}

#[test]
fn missed_ground_truth_is_red_and_hits_are_not() {
    let img = Image::new(64, 64);
    let hit = BBox::new(0.25, 0.25, 0.2, 0.2);
    let miss = BBox::new(0.75, 0.75, 0.2, 0.2);
    let dets = vec![Detection { bbox: hit, class: 2, score: 0.9 }];
    let out = render_detections(&img, &dets, &[(hit, 2), (miss, 5)], 9);

    // missed box perimeter: x,y round to [41.6..] -> 42..54
    assert_eq!(pixel(&out, 42, 48), [1.0, 0.0, 0.0]);
    assert_eq!(MISS_COLOR, [1.0, 0.0, 0.0]);
    // detected box perimeter carries the class color, not red
    let c = class_color(2, 9);
    assert_eq!(pixel(&out, 10, 16), c);
    // the input image is untouched
    assert_eq!(pixel(&img, 42, 48), [0.0, 0.0, 0.0]);
}

#[test]
fn threshold_sweep_matches_a_hand_worked_case() {
    // one class, two images; gt in each image, one true positive with a
    // higher score than one false positive
    let gt_a = BBox::new(0.3, 0.3, 0.2, 0.2);
    let gt_b = BBox::new(0.7, 0.7, 0.2, 0.2);
    let preds = vec![
        vec![Detection { bbox: gt_a, class: 0, score: 0.9 }],
        vec![Detection { bbox: BBox::new(0.1, 0.1, 0.05, 0.05), class: 0, score: 0.4 }],
    ];
    let gts = vec![vec![(gt_a, 0usize)], vec![(gt_b, 0usize)]];
    let rows = threshold_sweep(&preds, &gts, 1, &[0.5, 0.95]);
    assert_eq!(rows.len(), 2);
    // TP at rank 1 (precision 1, recall 1/2), FP at rank 2: AP = 0.5
    for row in &rows {
        assert!((row.map - 0.5).abs() < 1e-12, "{row:?}");
        assert!((row.mar - 0.5).abs() < 1e-12, "{row:?}");
    }
    let csv = sweep_to_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iou_threshold,mAP,mAR"));
    assert_eq!(lines.next(), Some("0.50,0.500000,0.500000"));
    assert_eq!(lines.next(), Some("0.95,0.500000,0.500000"));
}

#[test]
fn sweep_handles_classes_absent_from_ground_truth() {
    let preds = vec![vec![Detection { bbox: BBox::new(0.5, 0.5, 0.2, 0.2), class: 1, score: 0.8 }]];
    let gts = vec![vec![(BBox::new(0.5, 0.5, 0.2, 0.2), 0usize)]];
    let rows = threshold_sweep(&preds, &gts, 3, &[0.5]);
    // only class 0 has ground truth; its detections list is empty
    assert_eq!(rows[0].map, 0.0);
    assert_eq!(rows[0].mar, 0.0);
}
