//! End-to-end acceptance suite. Each test exercises one verifiable claim
//! about the toolkit and prints a single pass/fail line.

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwnet_cli::gradcheck::{run_suite, TOLERANCE};
use uwnet_data::{
    average_precision, evaluate, generate_scene, rasterized_iou_oracle, Detection, LabeledImage,
    SceneSpec,
};
use uwnet_detector::{
    build_model, detection_loss, evaluate_detector, images_to_batch, train_step, AnchorSet,
    DetectorModel, TrainConfig, FULL,
};
use uwnet_loss::{eiou, eiou_loss, iou, simsiam_loss, BBox};
use uwnet_nn::{ConvBlock, DeformConvModule, SPPFModule, TDConvModule, TDSPPFModule};
use uwnet_ssl::{
    augment_pair, collapse_metric, export_backbone, pretrain_step, AugmentationSpec, SiameseModel,
    EMBED_DIM,
};
use uwnet_tensor::optim::Adam;
use uwnet_tensor::{checkpoint, conv2d, maxpool2d, Shape, Tensor};

fn report(label: &str, body: impl FnOnce() + UnwindSafe) {
    let outcome = catch_unwind(body);
    println!("criterion {label}: {}", if outcome.is_ok() { "pass" } else { "fail" });
    if let Err(e) = outcome {
        resume_unwind(e);
    }
}

fn rand_box(rng: &mut ChaCha8Rng) -> BBox {
    let w = rng.gen_range(0.05..0.6);
    let h = rng.gen_range(0.05..0.6);
    BBox::new(rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), w, h)
}

fn scenes(n: u64, size: usize, seed: u64) -> Vec<LabeledImage> {
    let spec = SceneSpec { size, seed, ..SceneSpec::default() };
    (0..n).map(|i| generate_scene(&spec, i)).collect()
}

fn kmeans_anchors(data: &[LabeledImage]) -> AnchorSet {
    let whs: Vec<(f64, f64)> =
        data.iter().flat_map(|li| li.labels.iter().map(|(b, _)| (b.w, b.h))).collect();
    AnchorSet::kmeans(&whs).expect("enough boxes for k-means")
}

#[test]
fn criterion_1_gradients() {
    report("1 (finite-difference gradients)", || {
        let t0 = Instant::now();
        let reports = run_suite().unwrap();
        let required = [
            "conv2d_dilation1",
            "conv2d_dilation2",
            "conv2d_dilation3",
            "maxpool2d",
            "bilinear_sample",
            "deform_conv",
            "batch_norm",
            "silu",
            "sigmoid",
            "matmul",
            "eiou_loss",
            "confidence_loss",
            "classification_loss",
            "siamese_loss",
        ];
        for op in required {
            let r = reports.iter().find(|r| r.op == op).unwrap_or_else(|| panic!("{op} missing"));
            assert!(r.err < TOLERANCE, "{op}: rel err {} >= {TOLERANCE}", r.err);
        }
        assert!(t0.elapsed().as_secs_f64() < 60.0, "suite took {:?}", t0.elapsed());
    });
}

#[test]
fn criterion_2_box_overlap_math() {
    report("2 (IoU and box-regression loss)", || {
        // analytic IoU against the grid-counting oracle
        // the counting error scales with the cell size relative to the box
        // dimensions, so the cell tracks the smallest dimension in play
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (a, b) = (rand_box(&mut rng), rand_box(&mut rng));
            let cell = 2.5e-4 * a.w.min(a.h).min(b.w).min(b.h);
            let oracle = rasterized_iou_oracle(&a, &b, cell);
            assert!((iou(&a, &b) - oracle).abs() < 1e-3, "a {a:?} b {b:?} oracle {oracle}");
        }

        // worked cases: 2x2 squares offset by (1,1), then a 1x1 box
        // concentric with a 3x3 box
        let p = BBox::new(0.0, 0.0, 2.0, 2.0);
        let t = BBox::new(1.0, 1.0, 2.0, 2.0);
        assert!((eiou(&p, &t) - (1.0 / 7.0 - 1.0 / 9.0)).abs() < 1e-9);
        let p = BBox::new(0.0, 0.0, 1.0, 1.0);
        let t = BBox::new(0.0, 0.0, 3.0, 3.0);
        assert!((eiou(&p, &t) - (1.0 / 9.0 - 8.0 / 9.0)).abs() < 1e-9);

        // loss is nonnegative and zero exactly at coincidence
        for i in 0..100_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let a = rand_box(&mut rng);
            let b = if i % 10 == 0 { a } else { rand_box(&mut rng) };
            let l = eiou_loss(&a, &b);
            assert!(l >= 0.0, "negative loss {l} for {a:?} {b:?}");
            if a == b {
                assert_eq!(l, 0.0);
            } else {
                assert!(l > 0.0, "zero loss for distinct boxes {a:?} {b:?}");
            }
        }
    });
}

#[test]
fn criterion_3_stop_gradient() {
    report("3 (stop-gradient and loss symmetry)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mk = |rng: &mut ChaCha8Rng| {
            let data: Vec<f64> = (0..2 * 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Tensor::leaf(Shape::new(2, 16, 1, 1), data).unwrap()
        };
        let (pa, pb, za, zb) = (mk(&mut rng), mk(&mut rng), mk(&mut rng), mk(&mut rng));

        // gradients into the stopped target branches are exactly zero
        let loss = simsiam_loss(&pa, &pb, &za, &zb).unwrap();
        loss.backward().unwrap();
        for z in [&za, &zb] {
            let g = z.grad().unwrap_or_else(|| vec![0.0; z.numel()]);
            assert!(g.iter().all(|&v| v == 0.0), "nonzero gradient into a stopped target");
        }
        for p in [&pa, &pb] {
            let g = p.grad().expect("predictor branch must receive gradient");
            assert!(g.iter().any(|&v| v != 0.0));
        }

        // swapping the branch roles leaves the value unchanged
        let swapped = simsiam_loss(&pb, &pa, &zb, &za).unwrap();
        assert!((loss.item() - swapped.item()).abs() < 1e-6);

        // bounded in [-1, 1] across random inputs
        for _ in 0..50 {
            let (pa, pb, za, zb) = (mk(&mut rng), mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let v = simsiam_loss(&pa, &pb, &za, &zb).unwrap().item();
            assert!((-1.0..=1.0).contains(&v), "loss {v} out of range");
        }
    });
}

#[test]
fn criterion_4_module_identities() {
    report("4 (module structural identities)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xdata: Vec<f64> = (0..2 * 4 * 8 * 8).map(|_| rng.gen_range(-1.0_f64..1.0)).collect();
        let x = Tensor::<f64>::leaf(Shape::new(2, 4, 8, 8), xdata).unwrap();

        // deformable conv with its zero-initialized offsets equals conv2d
        let deform: DeformConvModule<f64> = DeformConvModule::new(&mut rng, 4, 6, 3).unwrap();
        let plain = conv2d(&x, &deform.weight, Some(&deform.bias), 1, 1, 1).unwrap();
        let deformed = deform.forward(&x).unwrap();
        let max_diff = plain
            .data()
            .iter()
            .zip(deformed.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-6, "zero-offset mismatch {max_diff}");

        // a trident block with all dilations 1 equals a single conv block
        let td: TDConvModule<f64> = TDConvModule::new(&mut rng, 4, 6, 3, (1, 1, 1)).unwrap();
        let block: ConvBlock<f64> = ConvBlock::new(&mut rng, 4, 6, 3, 1, 1);
        block.weight.set_data(&td.weight.to_vec());
        let a = td.forward(&x, false).unwrap();
        let b = block.forward(&x, false).unwrap();
        let max_diff = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-9, "trident(1,1,1) mismatch {max_diff}");

        // trident trainable parameter count equals one branch: one shared
        // conv weight plus batch-norm affine
        let mut tdp = uwnet_tensor::ParamSet::new();
        td.register(&mut tdp, "td").unwrap();
        let mut cbp = uwnet_tensor::ParamSet::new();
        block.register(&mut cbp, "cb").unwrap();
        let count = |p: &uwnet_tensor::ParamSet<f64>| {
            p.trainable().map(|q| q.tensor.numel()).sum::<usize>()
        };
        assert_eq!(count(&tdp), count(&cbp));

        // serial 5x5 poolings reproduce parallel 5/9/13 pooling exactly
        let p5 = maxpool2d(&x, 5, 1, 2).unwrap();
        let p9 = maxpool2d(&x, 9, 1, 4).unwrap();
        let p13 = maxpool2d(&x, 13, 1, 6).unwrap();
        let s1 = maxpool2d(&x, 5, 1, 2).unwrap();
        let s2 = maxpool2d(&s1, 5, 1, 2).unwrap();
        let s3 = maxpool2d(&s2, 5, 1, 2).unwrap();
        assert_eq!(s1.to_vec(), p5.to_vec());
        assert_eq!(s2.to_vec(), p9.to_vec());
        assert_eq!(s3.to_vec(), p13.to_vec());

        // both pooling pyramids build and agree on shape
        let sppf: SPPFModule<f64> = SPPFModule::new(&mut rng, 4, 8);
        let td_sppf: TDSPPFModule<f64> = TDSPPFModule::new(&mut rng, 4, 8).unwrap();
        assert_eq!(
            sppf.forward(&x, false).unwrap().shape(),
            td_sppf.forward(&x, false).unwrap().shape()
        );
    });
}

#[test]
fn criterion_5_training_progress() {
    report("5 (detector training and overfit)", || {
        use rand::seq::SliceRandom;

        let t0 = Instant::now();
        let data = scenes(200, 128, 5);
        let anchors = kmeans_anchors(&data);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model: DetectorModel<f32> = build_model(&mut rng, FULL, 9, 32, anchors).unwrap();
        let params = model.params();

        // 300 full-network steps over the 200-image set: total loss falls
        // below half of the average over the first ten steps. Adam keeps the
        // per-slot summed objectness term and the per-positive averaged
        // regression term on comparable footing despite their very
        // different gradient scales.
        let mut order: Vec<usize> = (0..200).collect();
        let mut opt = Adam::new(1e-3f32);
        let mut losses = Vec::with_capacity(300);
        for step in 0..300usize {
            if step % 50 == 0 {
                order.shuffle(&mut rng);
            }
            let batch: Vec<&LabeledImage> =
                (0..4).map(|i| &data[order[(step * 4 + i) % 200]]).collect();
            let b = train_step(&model, &params, &batch, &mut opt).unwrap();
            losses.push(b.values().3);
        }
        let early: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let last = losses[299];
        assert!(last < 0.5 * early, "loss {last} not below half of early average {early}");

        // the warmed-up model then memorizes a 32-image subset. Backbone
        // features are cached per image (a neck+head step is ~4x cheaper
        // than a full step) and the neck runs with frozen normalization
        // statistics, so the function being trained is exactly the
        // function being evaluated.
        let subset = &data[..32];
        let cached: Vec<(Vec<f32>, Vec<f32>, Vec<f32>)> = subset
            .iter()
            .map(|li| {
                let x = images_to_batch::<f32>(&[&li.image]).unwrap();
                let (c3, c4, c5) = model.backbone.forward(&x, false).unwrap();
                (c3.to_vec(), c4.to_vec(), c5.to_vec())
            })
            .collect();
        let (ch3, ch4, ch5) = model.backbone.out_channels();
        let batch_feats = |idxs: &[usize]| {
            let build =
                |pick: fn(&(Vec<f32>, Vec<f32>, Vec<f32>)) -> &Vec<f32>, ch: usize, g: usize| {
                    let mut d = Vec::with_capacity(idxs.len() * ch * g * g);
                    for &i in idxs {
                        d.extend_from_slice(pick(&cached[i]));
                    }
                    Tensor::<f32>::constant(Shape::new(idxs.len(), ch, g, g), d).unwrap()
                };
            (build(|c| &c.0, ch3, 16), build(|c| &c.1, ch4, 8), build(|c| &c.2, ch5, 4))
        };
        let nh = {
            let mut p = uwnet_tensor::ParamSet::new();
            for q in params.iter() {
                if !q.name.starts_with("backbone") {
                    p.push(q.name.clone(), q.tensor.clone(), q.trainable).unwrap();
                }
            }
            p
        };

        // evaluation uses an exponential moving average of the trainable
        // weights, which smooths step-to-step jitter in the live model
        let ema_decay = 0.995f32;
        let mut ema: Vec<Vec<f32>> = nh.trainable().map(|q| q.tensor.to_vec()).collect();
        let mut order: Vec<usize> = (0..32).collect();
        let mut opt = Adam::new(1e-3f32);
        let mut map = 0.0;
        for step in 0..1700usize {
            let b = step % 8;
            if b == 0 {
                order.shuffle(&mut rng);
            }
            let idxs = &order[b * 4..b * 4 + 4];
            let (c3, c4, c5) = batch_feats(idxs);
            let (p3, p4, p5) = model.neck.forward(&c3, &c4, &c5, false).unwrap();
            let raw = [
                model.heads[0].forward(&p3).unwrap(),
                model.heads[1].forward(&p4).unwrap(),
                model.heads[2].forward(&p5).unwrap(),
            ];
            let batch: Vec<&LabeledImage> = idxs.iter().map(|&i| &subset[i]).collect();
            let breakdown = detection_loss(&model, &raw, &batch, None).unwrap();
            nh.zero_grad();
            breakdown.total.backward().unwrap();
            opt.step(&nh).unwrap();
            for (e, q) in ema.iter_mut().zip(nh.trainable()) {
                let live = q.tensor.to_vec();
                for (ev, lv) in e.iter_mut().zip(live) {
                    *ev = ema_decay * *ev + (1.0 - ema_decay) * lv;
                }
            }
            if step >= 599 && step % 200 == 199 {
                // swap in the averaged weights, evaluate, swap back
                let saved: Vec<Vec<f32>> = nh.trainable().map(|q| q.tensor.to_vec()).collect();
                for (e, q) in ema.iter().zip(nh.trainable()) {
                    q.tensor.set_data(e);
                }
                map = evaluate_detector(&model, subset, 1e-3, 0.45).unwrap().map50;
                for (s0, q) in saved.iter().zip(nh.trainable()) {
                    q.tensor.set_data(s0);
                }
                if map >= 0.8 {
                    break;
                }
            }
        }
        assert!(map >= 0.8, "overfit mAP@0.5 {map} < 0.8");
        let elapsed = t0.elapsed().as_secs_f64();
        assert!(elapsed < 900.0, "criterion took {elapsed:.0}s, budget 900s");
    });
}

#[test]
fn criterion_6_pretraining_progress() {
    report("6 (self-supervised pretraining)", || {
        let t0 = Instant::now();
        let images: Vec<_> = scenes(64, 64, 6).into_iter().map(|li| li.image).collect();
        let spec = AugmentationSpec::default();

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model: SiameseModel<f32> = SiameseModel::new(&mut rng);
        let params = model.params();
        let mut opt = Adam::new(1e-3f32);

        let mut losses = Vec::with_capacity(200);
        for step in 0..200usize {
            let pairs: Vec<_> = (0..4)
                .map(|i| {
                    let idx = (step * 4 + i) % images.len();
                    augment_pair(&images[idx], &spec, (step * 4 + i) as u64).unwrap()
                })
                .collect();
            losses.push(pretrain_step(&model, &params, &pairs, &mut opt).unwrap());
        }
        let head: f64 = losses[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = losses[180..].iter().sum::<f64>() / 20.0;
        assert!(head - tail >= 0.1, "loss only moved from {head:.4} to {tail:.4}");

        // embeddings keep spread: no collapse to a constant vector
        let refs: Vec<_> = images.iter().take(16).collect();
        let metric = collapse_metric(&model, &refs).unwrap();
        let floor = 0.25 / (EMBED_DIM as f64).sqrt();
        assert!(metric > floor, "collapse metric {metric} at or below floor {floor}");
        let elapsed = t0.elapsed().as_secs_f64();
        assert!(elapsed < 300.0, "criterion took {elapsed:.0}s, budget 300s");
    });
}

#[test]
fn criterion_7_ablation_determinism() {
    report("7 (deterministic variant ablation)", || {
        let t0 = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let data_dir = dir.path().join("data");
        uwnet_cli::commands::cmd_gen(&uwnet_cli::commands::GenOpts {
            out: data_dir.clone(),
            count: 20,
            size: 64,
            classes: 9,
            seed: 7,
        })
        .unwrap();

        let run = |out: &std::path::Path| {
            uwnet_cli::commands::cmd_ablate(&uwnet_cli::commands::AblateOpts {
                data: data_dir.clone(),
                out: out.to_path_buf(),
                width: 16,
                classes: 9,
                cfg: TrainConfig { epochs: 1, batch_size: 4, seed: 7, ..TrainConfig::default() },
            })
            .unwrap()
        };
        let first = run(&dir.path().join("run1"));
        let second = run(&dir.path().join("run2"));

        assert_eq!(first.len(), 5);
        for (a, b) in first.iter().zip(&second) {
            assert!(a.map50.is_finite() && a.mar.is_finite(), "non-finite metric in {}", a.model);
            assert_eq!(a.model, b.model);
            assert_eq!(a.map50.to_bits(), b.map50.to_bits(), "{}: mAP differs across runs", a.model);
            assert_eq!(a.mar.to_bits(), b.mar.to_bits(), "{}: mAR differs across runs", a.model);
        }
        let csv1 = std::fs::read_to_string(dir.path().join("run1/ablation.csv")).unwrap();
        let csv2 = std::fs::read_to_string(dir.path().join("run2/ablation.csv")).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(csv1.lines().count(), 6); // header + five variants
        let elapsed = t0.elapsed().as_secs_f64();
        assert!(elapsed < 1800.0, "criterion took {elapsed:.0}s, budget 1800s");
    });
}

#[test]
fn criterion_8_average_precision() {
    report("8 (average precision bookkeeping)", || {
        let b = |i: usize| BBox::new(0.1 + 0.15 * i as f64, 0.5, 0.1, 0.1);
        let far = BBox::new(0.9, 0.9, 0.05, 0.05);

        // case 1: TP, FP, TP over two targets
        // ranks: p=1 r=1/2; p=1/2 r=1/2; p=2/3 r=1 -> AP = 1/2 + 1/2 * 2/3
        let dets = vec![(0, b(0), 0.9), (0, far, 0.8), (0, b(1), 0.7)];
        let gts = vec![(0, b(0)), (0, b(1))];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-9, "case 1 AP {ap}");

        // case 2: TP, TP, FP over three targets -> AP = 2/3
        let dets = vec![(0, b(0), 0.9), (0, b(1), 0.8), (0, far, 0.7)];
        let gts = vec![(0, b(0)), (0, b(1)), (0, b(2))];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - 2.0 / 3.0).abs() < 1e-9, "case 2 AP {ap}");

        // case 3: FP then TP over one target -> interpolated AP = 1/2
        let dets = vec![(0, far, 0.9), (0, b(0), 0.8)];
        let gts = vec![(0, b(0))];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - 0.5).abs() < 1e-9, "case 3 AP {ap}");

        // mAP is exactly the mean of the per-class APs
        let preds = vec![vec![
            Detection { bbox: b(0), class: 0, score: 0.9 },
            Detection { bbox: far, class: 0, score: 0.8 },
            Detection { bbox: b(1), class: 1, score: 0.9 },
        ]];
        let gt = vec![vec![(b(0), 0usize), (b(1), 0usize), (b(1), 1usize)]];
        let r = evaluate("probe", &preds, &gt, 2).unwrap();
        let ap0 = r.per_class_ap[0].unwrap();
        let ap1 = r.per_class_ap[1].unwrap();
        assert_eq!(r.map50, (ap0 + ap1) / 2.0);

        // ground truth replayed as predictions scores a perfect map
        let data = scenes(12, 64, 8);
        let preds: Vec<Vec<Detection>> = data
            .iter()
            .map(|li| {
                li.labels
                    .iter()
                    .map(|&(bbox, class)| Detection { bbox, class, score: 1.0 })
                    .collect()
            })
            .collect();
        let gts: Vec<_> = data.iter().map(|li| li.labels.clone()).collect();
        let r = evaluate("oracle", &preds, &gts, 9).unwrap();
        assert_eq!(r.map50, 1.0);
        assert_eq!(r.mar, 1.0);
    });
}

#[test]
fn criterion_9_checkpoint_roundtrip() {
    report("9 (checkpoints and backbone transfer)", || {
        let dir = tempfile::tempdir().unwrap();

        // bit-exact save/load of a detector parameter set
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model: DetectorModel<f32> =
            build_model(&mut rng, FULL, 9, 16, AnchorSet::default()).unwrap();
        let params = model.params();
        let path = dir.path().join("model.ckpt");
        checkpoint::save(&path, &params).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let twin: DetectorModel<f32> =
            build_model(&mut rng, FULL, 9, 16, AnchorSet::default()).unwrap();
        let twin_params = twin.params();
        checkpoint::load_into(&path, &twin_params).unwrap();
        for (a, b) in params.iter().zip(twin_params.iter()) {
            assert_eq!(a.name, b.name);
            let (av, bv) = (a.tensor.to_vec(), b.tensor.to_vec());
            assert_eq!(av.len(), bv.len());
            for (x, y) in av.iter().zip(&bv) {
                assert_eq!(x.to_bits(), y.to_bits(), "{} not bit-exact", a.name);
            }
        }

        // pretraining export loads into a detector: every backbone
        // parameter matches by name and value
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ssl: SiameseModel<f32> = SiameseModel::new(&mut rng);
        let bpath = dir.path().join("backbone.ckpt");
        export_backbone(&ssl, &bpath).unwrap();

        let report = checkpoint::load_matching(&bpath, &twin_params).unwrap();
        let backbone_count =
            twin_params.iter().filter(|p| p.name.starts_with("backbone.")).count();
        assert_eq!(report.matched.len(), backbone_count);
        assert!(report.unmatched_in_file.is_empty());

        let ssl_params = ssl.params();
        for name in &report.matched {
            let src = ssl_params.get(name).expect("exported name exists in the source model");
            let dst = twin_params.get(name).unwrap();
            assert_eq!(src.tensor.to_vec(), dst.tensor.to_vec(), "{name} differs after transfer");
        }
    });
}
