use uwnet_tensor::optim::{Adam, Sgd};
use uwnet_tensor::{checkpoint, ParamSet, Shape, Tensor};

#[test]
fn sgd_single_step() {
    let w = Tensor::leaf(Shape::SCALAR, vec![0.0f64]).unwrap();
    let mut params = ParamSet::new();
    params.push("w", w.clone(), true).unwrap();
    w.scale(1.0).sum().backward().unwrap();
    let mut opt = Sgd::new(0.1, 0.0);
    opt.step(&params).unwrap();
    assert!((w.item() - (-0.1)).abs() < 1e-15);
}

#[test]
fn sgd_missing_grad_names_parameter() {
    let w = Tensor::leaf(Shape::SCALAR, vec![0.0f64]).unwrap();
    let mut params = ParamSet::new();
    params.push("layer.weight", w, true).unwrap();
    let mut opt = Sgd::new(0.1, 0.0);
    let err = opt.step(&params).unwrap_err().to_string();
    assert!(err.contains("layer.weight"), "{err}");
}

#[test]
fn sgd_converges_on_quadratic() {
    // f(w) = (w - 3)^2, lr 0.1: geometric decay to the minimum
    let w = Tensor::leaf(Shape::SCALAR, vec![0.0f64]).unwrap();
    let mut params = ParamSet::new();
    params.push("w", w.clone(), true).unwrap();
    let mut opt = Sgd::new(0.1, 0.0);
    for _ in 0..100 {
        params.zero_grad();
        let loss = w.add_scalar(-3.0).square().sum();
        loss.backward().unwrap();
        opt.step(&params).unwrap();
    }
    assert!((w.item() - 3.0).abs() < 1e-4, "w = {}", w.item());
}

#[test]
fn adam_first_step_magnitude_is_lr() {
    // bias correction makes the first update ±lr regardless of grad scale
    for g in [0.001f64, 1.0, 250.0] {
        let w = Tensor::leaf(Shape::SCALAR, vec![0.0f64]).unwrap();
        let mut params = ParamSet::new();
        params.push("w", w.clone(), true).unwrap();
        w.scale(g).sum().backward().unwrap();
        let mut opt = Adam::new(0.01);
        opt.step(&params).unwrap();
        assert!((w.item().abs() - 0.01).abs() < 1e-6, "grad {g}: step {}", w.item());
    }
}

fn sample_params() -> ParamSet<f64> {
    let mut params = ParamSet::new();
    params
        .push(
            "backbone.stem.conv.weight",
            Tensor::leaf(Shape::new(2, 3, 3, 3), (0..54).map(|i| i as f64 * 0.37 - 3.1).collect()).unwrap(),
            true,
        )
        .unwrap();
    params
        .push(
            "backbone.stem.bn.gamma",
            Tensor::leaf(Shape::new(1, 2, 1, 1), vec![1.0, 0.5]).unwrap(),
            true,
        )
        .unwrap();
    params
        .push(
            "head.bias",
            Tensor::leaf(Shape::new(4, 1, 1, 1), vec![0.1, -0.2, 0.3, std::f64::consts::PI]).unwrap(),
            true,
        )
        .unwrap();
    params
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let params = sample_params();
    checkpoint::save(&path, &params).unwrap();

    let restored = sample_params();
    for p in restored.iter() {
        p.tensor.with_data_mut(|d| d.iter_mut().for_each(|v| *v = 0.0));
    }
    checkpoint::load_into(&path, &restored).unwrap();
    let original = sample_params();
    for (a, b) in restored.iter().zip(original.iter()) {
        let (av, bv) = (a.tensor.to_vec(), b.tensor.to_vec());
        assert!(av.iter().zip(&bv).all(|(x, y)| x.to_bits() == y.to_bits()), "{}", a.name);
    }
}

#[test]
fn load_reports_missing_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&path, &sample_params()).unwrap();

    let mut bigger = sample_params();
    bigger
        .push("neck.extra.weight", Tensor::leaf(Shape::SCALAR, vec![1.0]).unwrap(), true)
        .unwrap();
    let err = checkpoint::load_into(&path, &bigger).unwrap_err().to_string();
    assert!(err.contains("neck.extra.weight"), "{err}");
}

#[test]
fn load_rejects_shape_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&path, &sample_params()).unwrap();

    let mut other = ParamSet::new();
    other
        .push("head.bias", Tensor::<f64>::leaf(Shape::new(5, 1, 1, 1), vec![0.0; 5]).unwrap(), true)
        .unwrap();
    let err = checkpoint::load_matching(&path, &other).unwrap_err().to_string();
    assert!(err.contains("shape mismatch"), "{err}");
}

#[test]
fn rejects_bad_magic_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&path, &sample_params()).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    let bad = dir.path().join("bad.ckpt");
    let mut corrupted = bytes.clone();
    corrupted[0] = b'X';
    std::fs::write(&bad, &corrupted).unwrap();
    let err = checkpoint::read_entries(&bad).unwrap_err().to_string();
    assert!(err.contains("magic"), "{err}");

    let trunc = dir.path().join("trunc.ckpt");
    std::fs::write(&trunc, &bytes[..bytes.len() - 7]).unwrap();
    let err = checkpoint::read_entries(&trunc).unwrap_err().to_string();
    assert!(err.contains("truncated"), "{err}");
}

#[test]
fn partial_load_by_prefix_counts_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("backbone.ckpt");
    let full = sample_params();
    let backbone = full.subtree("backbone.");
    assert_eq!(backbone.len(), 2);
    checkpoint::save(&path, &backbone).unwrap();

    let target = sample_params();
    let report = checkpoint::load_matching(&path, &target).unwrap();
    assert_eq!(report.matched.len(), 2);
    assert!(report.unmatched_in_file.is_empty());
    assert_eq!(report.unmatched_in_model, vec!["head.bias".to_string()]);
}
