use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwnet_data::{generate_scene, LabeledImage, SceneSpec};
use uwnet_detector::{
    build_model, evaluate_detector, fit, train_step, AnchorSet, ModelMeta, TrainConfig,
    ALL_VARIANTS, FULL,
};
use uwnet_ssl::{export_backbone, SiameseModel};
use uwnet_tensor::optim::Sgd;
use uwnet_tensor::checkpoint;

fn scenes(n: u64, size: usize, seed: u64) -> Vec<LabeledImage> {
    let spec = SceneSpec { size, seed, ..SceneSpec::default() };
    (0..n).map(|i| generate_scene(&spec, i)).collect()
}

fn small_model(seed: u64) -> uwnet_detector::DetectorModel<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_model(&mut rng, FULL, 9, 32, AnchorSet::default()).unwrap()
}

#[test]
fn total_is_the_exact_component_sum_and_all_variants_stay_finite() {
    let data = scenes(2, 64, 31);
    let batch: Vec<&LabeledImage> = data.iter().collect();
    for v in ALL_VARIANTS {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let model = build_model::<f32>(&mut rng, v, 9, 32, AnchorSet::default()).unwrap();
        let params = model.params();
        let mut opt = Sgd::new(0.01f32, 0.9);
        let b = train_step(&model, &params, &batch, &mut opt).unwrap();
        let (re, co, cl, total) = b.values();
        assert!(re.is_finite() && co.is_finite() && cl.is_finite(), "{}", v.name());
        assert!((total - (re + co + cl)).abs() < 1e-6 * total.abs().max(1.0));
    }
}

#[test]
fn zero_ground_truth_batch_trains_on_confidence_alone() {
    let mut data = scenes(2, 64, 33);
    for li in &mut data {
        li.labels.clear();
    }
    let model = small_model(33);
    let params = model.params();
    let mut opt = Sgd::new(0.01f32, 0.9);
    let batch: Vec<&LabeledImage> = data.iter().collect();
    let b = train_step(&model, &params, &batch, &mut opt).unwrap();
    let (re, co, cl, total) = b.values();
    assert_eq!(re, 0.0);
    assert_eq!(cl, 0.0);
    assert!(co > 0.0);
    assert_eq!(total, co);
    assert!(train_step(&model, &params, &[], &mut opt).is_err());
}

#[test]
fn short_training_run_reduces_the_loss() {
    let data = scenes(8, 64, 35);
    let model = small_model(35);
    let params = model.params();
    let mut opt = Sgd::new(0.01f32, 0.937);
    let mut first = 0.0;
    let mut last = 0.0;
    for step in 0..30 {
        let batch: Vec<&LabeledImage> =
            (0..4).map(|i| &data[(step * 4 + i) % data.len()]).collect();
        let (_, _, _, total) = train_step(&model, &params, &batch, &mut opt).unwrap().values();
        assert!(total.is_finite());
        if step == 0 {
            first = total;
        }
        last = total;
    }
    assert!(last < first, "{last} !< {first}");
}

#[test]
fn fit_is_deterministic_and_logs_one_record_per_epoch() {
    let train: Vec<LabeledImage> = scenes(8, 64, 36);
    let val: Vec<LabeledImage> = scenes(4, 64, 37);
    let cfg = TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() };
    let run = || {
        let model = small_model(36);
        let params = model.params();
        let mut seen = 0;
        let records =
            fit(&model, &params, &train, &val, &cfg, None, &mut |_| seen += 1).unwrap();
        assert_eq!(seen, 2);
        records
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert_eq!((a[0].epoch, a[1].epoch), (0, 1));
    let line = serde_json::to_string(&a[0]).unwrap();
    assert!(line.contains("\"l_re\"") && line.contains("\"map\""));
}

#[test]
fn evaluation_of_an_untrained_model_is_well_formed() {
    let val = scenes(4, 64, 38);
    let model = small_model(38);
    let report = evaluate_detector(&model, &val, 0.25, 0.45).unwrap();
    assert_eq!(report.images, 4);
    assert!(report.map50.is_finite() && (0.0..=1.0).contains(&report.map50));
}

#[test]
fn pretrained_backbone_transfers_name_for_name() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    let ssl = SiameseModel::<f32>::new(&mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bb.ckpt");
    export_backbone(&ssl, &path).unwrap();

    let model = small_model(40);
    let params = model.params();
    let report = checkpoint::load_matching(&path, &params).unwrap();
    let backbone_count = params.iter().filter(|p| p.name.starts_with("backbone.")).count();
    assert_eq!(report.matched.len(), backbone_count);
    assert!(report.unmatched_in_file.is_empty());

    // the transferred weights are the pretrained values, bit for bit
    let ssl_params = ssl.params();
    for p in params.iter().filter(|p| p.name.starts_with("backbone.")) {
        let src = ssl_params.get(&p.name).unwrap();
        assert_eq!(p.tensor.to_vec(), src.tensor.to_vec(), "{}", p.name);
    }
}

#[test]
fn model_meta_round_trips_as_json() {
    let meta = ModelMeta {
        variant: "full".to_string(),
        num_classes: 9,
        width: 64,
        anchors: AnchorSet::default(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta.json");
    meta.save(&path).unwrap();
    assert_eq!(ModelMeta::load(&path).unwrap(), meta);
}
