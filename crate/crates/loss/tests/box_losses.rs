use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwnet_loss::{eiou, eiou_loss, iou, regression_loss, BBox};

/// Counts fine cell centers lying inside both intervals; boxes are axis
/// aligned, so the 2D overlap factors into per-axis overlaps.
fn overlap_raster(lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64, cell: f64) -> f64 {
    let lo = lo_a.min(lo_b);
    let hi = hi_a.max(hi_b);
    let n = ((hi - lo) / cell).ceil() as usize;
    let mut count = 0u64;
    for i in 0..n {
        let x = lo + (i as f64 + 0.5) * cell;
        if x >= lo_a && x <= hi_a && x >= lo_b && x <= hi_b {
            count += 1;
        }
    }
    count as f64 * cell
}

/// Independent rasterization oracle built from the separable 1D overlaps.
fn iou_raster(a: &BBox, b: &BBox, cell: f64) -> f64 {
    let iw = overlap_raster(a.x1(), a.x2(), b.x1(), b.x2(), cell);
    let ih = overlap_raster(a.y1(), a.y2(), b.y1(), b.y2(), cell);
    let area = |lo: f64, hi: f64| overlap_raster(lo, hi, lo, hi, cell);
    let inter = iw * ih;
    let union = area(a.x1(), a.x2()) * area(a.y1(), a.y2())
        + area(b.x1(), b.x2()) * area(b.y1(), b.y2())
        - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn rand_box(rng: &mut ChaCha8Rng) -> BBox {
    BBox::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.1..3.0),
        rng.gen_range(0.1..3.0),
    )
}

#[test]
fn iou_identical_and_disjoint() {
    let a = BBox::new(0.5, 0.5, 1.0, 1.0);
    assert_eq!(iou(&a, &a), 1.0);
    let b = BBox::new(10.0, 10.0, 1.0, 1.0);
    assert_eq!(iou(&a, &b), 0.0);
}

#[test]
fn iou_one_seventh_case() {
    let a = BBox::new(0.0, 0.0, 2.0, 2.0);
    let b = BBox::new(1.0, 1.0, 2.0, 2.0);
    let analytic = iou(&a, &b);
    assert!((analytic - 1.0 / 7.0).abs() < 1e-12);
    let raster = iou_raster(&a, &b, 1e-4);
    assert!((analytic - raster).abs() < 1e-3, "raster {raster}");
}

#[test]
fn iou_matches_rasterization_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let a = rand_box(&mut rng);
        let b = rand_box(&mut rng);
        let raster = iou_raster(&a, &b, 1e-5);
        assert!((iou(&a, &b) - raster).abs() < 2e-3, "a {a:?} b {b:?}");
    }
}

#[test]
fn eiou_coincident_boxes() {
    let a = BBox::new(1.0, -2.0, 3.0, 0.5);
    assert_eq!(eiou(&a, &a), 1.0);
    assert_eq!(eiou_loss(&a, &a), 0.0);
}

#[test]
fn eiou_worked_case_offset_squares() {
    // 2x2 squares offset by (1,1): enclosure 3x3, c^2 = 18, center 2
    let p = BBox::new(0.0, 0.0, 2.0, 2.0);
    let t = BBox::new(1.0, 1.0, 2.0, 2.0);
    let expect = 1.0 / 7.0 - 1.0 / 9.0;
    assert!((eiou(&p, &t) - expect).abs() < 1e-9);
    assert!((eiou_loss(&p, &t) - (1.0 - expect)).abs() < 1e-9);
}

#[test]
fn eiou_worked_case_nested_squares() {
    // concentric 1x1 inside 3x3: IoU 1/9, width/height penalties 4/9 each
    let p = BBox::new(0.0, 0.0, 1.0, 1.0);
    let t = BBox::new(0.0, 0.0, 3.0, 3.0);
    assert!((eiou(&p, &t) - (1.0 / 9.0 - 8.0 / 9.0)).abs() < 1e-9);
}

#[test]
fn eiou_bounded_by_iou_and_loss_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100_000 {
        let a = rand_box(&mut rng);
        let b = rand_box(&mut rng);
        let e = eiou(&a, &b);
        let i = iou(&a, &b);
        assert!(e <= i + 1e-12);
        assert!(i <= 1.0);
        let l = eiou_loss(&a, &b);
        assert!(l >= 0.0);
        if l == 0.0 {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn eiou_translation_and_scale_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..500 {
        let a = rand_box(&mut rng);
        let b = rand_box(&mut rng);
        let (dx, dy) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let at = BBox::new(a.cx + dx, a.cy + dy, a.w, a.h);
        let bt = BBox::new(b.cx + dx, b.cy + dy, b.w, b.h);
        assert!((iou(&a, &b) - iou(&at, &bt)).abs() < 1e-9);
        assert!((eiou(&a, &b) - eiou(&at, &bt)).abs() < 1e-9);

        let s = rng.gen_range(0.1..10.0);
        let asc = BBox::new(a.cx * s, a.cy * s, a.w * s, a.h * s);
        let bsc = BBox::new(b.cx * s, b.cy * s, b.w * s, b.h * s);
        assert!((iou(&a, &b) - iou(&asc, &bsc)).abs() < 1e-9);
        assert!((eiou(&a, &b) - eiou(&asc, &bsc)).abs() < 1e-9);
    }
}

#[test]
fn regression_loss_empty_and_sums() {
    assert_eq!(regression_loss(&[]), 0.0);
    let a = BBox::new(0.0, 0.0, 1.0, 1.0);
    assert_eq!(regression_loss(&[(a, a), (a, a), (a, a)]), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let pairs: Vec<(BBox, BBox)> = (0..5).map(|_| (rand_box(&mut rng), rand_box(&mut rng))).collect();
    let expect: f64 = pairs.iter().map(|(p, t)| 1.0 - eiou(p, t)).sum();
    assert!((regression_loss(&pairs) - expect).abs() < 1e-12);
}
