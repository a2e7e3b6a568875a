use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwnet_loss::{
    bce_sum, classification_loss, confidence_loss, eiou, eiou_components, eiou_loss_components,
    neg_cosine, simsiam_loss, total_loss, BBox,
};
use uwnet_tensor::gradcheck::finite_diff_check;
use uwnet_tensor::{Shape, Tensor};

fn vec2(x: f64, y: f64) -> Tensor<f64> {
    Tensor::constant(Shape::new(1, 2, 1, 1), vec![x, y]).unwrap()
}

#[test]
fn neg_cosine_parallel_orthogonal_and_diagonal() {
    let p = vec2(2.0, 0.0);
    assert!((neg_cosine(&p, &p).unwrap().item() + 1.0).abs() < 1e-12);
    let q = vec2(0.0, 3.0);
    assert!(neg_cosine(&p, &q).unwrap().item().abs() < 1e-12);
    let d = vec2(1.0, 1.0);
    let expect = -(2.0f64).sqrt() / 2.0; // hand dot product: 1/(1*sqrt(2))
    assert!((neg_cosine(&p, &d).unwrap().item() - expect).abs() < 1e-9);
}

#[test]
fn neg_cosine_rejects_dimension_mismatch() {
    let p = vec2(1.0, 0.0);
    let z = Tensor::<f64>::constant(Shape::new(1, 3, 1, 1), vec![1.0, 0.0, 0.0]).unwrap();
    assert!(neg_cosine(&p, &z).is_err());
}

#[test]
fn simsiam_perfect_alignment_and_orthogonality() {
    let a = vec2(0.3, -0.8);
    let b = vec2(1.5, 0.2);
    // pA = zB, pB = zA -> both cosines are 1
    let l = simsiam_loss(&b, &a, &a, &b).unwrap().item();
    assert!((l + 1.0).abs() < 1e-12);
    // orthogonal pairs -> 0
    let l = simsiam_loss(&vec2(1.0, 0.0), &vec2(0.0, 2.0), &vec2(3.0, 0.0), &vec2(0.0, 1.0))
        .unwrap()
        .item();
    assert!(l.abs() < 1e-12);
}

#[test]
fn simsiam_symmetric_under_view_exchange() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let mk = |rng: &mut ChaCha8Rng| {
            Tensor::<f64>::constant(
                Shape::new(2, 8, 1, 1),
                (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let (pa, pb, za, zb) = (mk(&mut rng), mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let l1 = simsiam_loss(&pa, &pb, &za, &zb).unwrap().item();
        let l2 = simsiam_loss(&pb, &pa, &zb, &za).unwrap().item();
        assert!((l1 - l2).abs() < 1e-6);
        assert!((-1.0..=1.0).contains(&l1));
    }
}

#[test]
fn simsiam_stop_gradient_blocks_target_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mk = |rng: &mut ChaCha8Rng| {
        Tensor::<f64>::leaf(
            Shape::new(1, 4, 1, 1),
            (0..4).map(|_| rng.gen_range(0.1..1.0)).collect(),
        )
        .unwrap()
    };
    let (pa, pb, za, zb) = (mk(&mut rng), mk(&mut rng), mk(&mut rng), mk(&mut rng));
    let loss = simsiam_loss(&pa, &pb, &za, &zb).unwrap();
    loss.backward().unwrap();
    // stopped targets receive exactly zero gradient
    assert!(za.grad().map_or(true, |g| g.iter().all(|&v| v == 0.0)));
    assert!(zb.grad().map_or(true, |g| g.iter().all(|&v| v == 0.0)));
    // predictor outputs receive a generic nonzero gradient
    assert!(pa.grad().unwrap().iter().any(|&v| v != 0.0));
    assert!(pb.grad().unwrap().iter().any(|&v| v != 0.0));
}

/// Without the stop, the same target vector does receive gradient.
#[test]
fn unstopped_cosine_has_target_gradient() {
    let p = Tensor::<f64>::leaf(Shape::new(1, 2, 1, 1), vec![0.5, 0.2]).unwrap();
    let z = Tensor::<f64>::leaf(Shape::new(1, 2, 1, 1), vec![0.9, -0.3]).unwrap();
    neg_cosine(&p, &z).unwrap().backward().unwrap();
    assert!(z.grad().unwrap().iter().any(|&v| v != 0.0));
}

fn split_box(t: &Tensor<f64>) -> [Tensor<f64>; 4] {
    [
        t.slice_channels(0, 1).unwrap(),
        t.slice_channels(1, 2).unwrap(),
        t.slice_channels(2, 3).unwrap(),
        t.slice_channels(3, 4).unwrap(),
    ]
}

#[test]
fn eiou_graph_matches_scalar_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..200 {
        let p = BBox::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.1..3.0),
            rng.gen_range(0.1..3.0),
        );
        let t = BBox::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.1..3.0),
            rng.gen_range(0.1..3.0),
        );
        let pt = Tensor::constant(Shape::new(1, 4, 1, 1), vec![p.cx, p.cy, p.w, p.h]).unwrap();
        let tt = Tensor::constant(Shape::new(1, 4, 1, 1), vec![t.cx, t.cy, t.w, t.h]).unwrap();
        let [pcx, pcy, pw, ph] = split_box(&pt);
        let [tcx, tcy, tw, th] = split_box(&tt);
        let graph = eiou_components(&pcx, &pcy, &pw, &ph, &tcx, &tcy, &tw, &th)
            .unwrap()
            .item();
        assert!((graph - eiou(&p, &t)).abs() < 1e-12, "graph {graph} scalar {}", eiou(&p, &t));
    }
}

#[test]
fn eiou_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..20 {
        let pred = Tensor::<f64>::leaf(
            Shape::new(1, 4, 1, 1),
            vec![
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
            ],
        )
        .unwrap();
        let tgt = Tensor::<f64>::constant(
            Shape::new(1, 4, 1, 1),
            vec![
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
            ],
        )
        .unwrap();
        let tgt2 = tgt.clone();
        let err = finite_diff_check(
            move |p| {
                let [pcx, pcy, pw, ph] = split_box(p);
                let [tcx, tcy, tw, th] = split_box(&tgt2);
                Ok(eiou_loss_components(&pcx, &pcy, &pw, &ph, &tcx, &tcy, &tw, &th)?.sum())
            },
            &pred,
            1e-5,
            4,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}

#[test]
fn confidence_loss_values() {
    // perfect prediction after clamping
    let m = 16;
    let t = Tensor::<f64>::constant(Shape::new(1, 1, 1, m), (0..m).map(|i| (i % 2) as f64).collect()).unwrap();
    let loss = confidence_loss(&t, &t).unwrap().item();
    assert!(loss <= m as f64 * 1.2e-7, "{loss}");

    // single box, C = 0.5, target 1 -> -ln 0.5
    let p = Tensor::<f64>::constant(Shape::SCALAR, vec![0.5]).unwrap();
    let t = Tensor::<f64>::constant(Shape::SCALAR, vec![1.0]).unwrap();
    assert!((confidence_loss(&p, &t).unwrap().item() - 0.693147).abs() < 1e-6);
}

#[test]
fn confidence_loss_rejects_soft_targets() {
    let p = Tensor::<f64>::constant(Shape::SCALAR, vec![0.5]).unwrap();
    let t = Tensor::<f64>::constant(Shape::SCALAR, vec![0.25]).unwrap();
    assert!(confidence_loss(&p, &t).is_err());
}

#[test]
fn bce_matches_scalar_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let n = 4 * 9;
    let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
    let tgt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let pt = Tensor::constant(Shape::new(1, 1, 4, 9), pred.clone()).unwrap();
    let tt = Tensor::constant(Shape::new(1, 1, 4, 9), tgt.clone()).unwrap();
    let loss = classification_loss(&pt, &tt).unwrap().item();
    let mut expect = 0.0;
    for i in 0..n {
        expect -= tgt[i] * pred[i].ln() + (1.0 - tgt[i]) * (1.0 - pred[i]).ln();
    }
    assert!((loss - expect).abs() < 1e-6, "loss {loss} expect {expect}");
}

#[test]
fn classification_loss_values() {
    // one-hot target perfectly predicted
    let p = Tensor::<f64>::constant(Shape::new(1, 1, 1, 2), vec![1.0, 0.0]).unwrap();
    assert!(classification_loss(&p, &p).unwrap().item() < 1e-5);
    // S=1, K=2, uniform prediction vs one-hot -> 2 ln 2
    let p = Tensor::<f64>::constant(Shape::new(1, 1, 1, 2), vec![0.5, 0.5]).unwrap();
    let t = Tensor::<f64>::constant(Shape::new(1, 1, 1, 2), vec![1.0, 0.0]).unwrap();
    assert!((classification_loss(&p, &t).unwrap().item() - 1.386294).abs() < 1e-6);
    // K mismatch rejected
    let t3 = Tensor::<f64>::constant(Shape::new(1, 1, 1, 3), vec![1.0, 0.0, 0.0]).unwrap();
    assert!(classification_loss(&p, &t3).is_err());
}

#[test]
fn bce_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let logits = Tensor::<f64>::leaf(
        Shape::new(1, 1, 2, 4),
        (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let tgt = Tensor::<f64>::constant(
        Shape::new(1, 1, 2, 4),
        (0..8).map(|i| (i % 2) as f64).collect(),
    )
    .unwrap();
    let err = finite_diff_check(
        move |x| bce_sum(&x.sigmoid(), &tgt),
        &logits,
        1e-5,
        8,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn total_loss_is_exact_sum_with_gradient_linearity() {
    let re = Tensor::<f64>::constant(Shape::SCALAR, vec![1.25]).unwrap();
    let co = Tensor::<f64>::constant(Shape::SCALAR, vec![0.693147]).unwrap();
    let cl = Tensor::<f64>::constant(Shape::SCALAR, vec![1.386294]).unwrap();
    let bd = total_loss(re, co, cl, None).unwrap();
    assert!((bd.total.item() - 3.329441).abs() < 1e-9);

    let zero = total_loss(
        Tensor::<f64>::scalar(0.0),
        Tensor::<f64>::scalar(0.0),
        Tensor::<f64>::scalar(0.0),
        None,
    )
    .unwrap();
    assert_eq!(zero.total.item(), 0.0);

    // gradient of the sum equals the sum of the component gradients
    let w = Tensor::<f64>::leaf(Shape::SCALAR, vec![0.7]).unwrap();
    let bd = total_loss(w.square().sum(), w.scale(3.0).sum(), w.sum(), None).unwrap();
    bd.total.backward().unwrap();
    let expect = 2.0 * 0.7 + 3.0 + 1.0;
    assert!((w.grad().unwrap()[0] - expect).abs() < 1e-12);
}
