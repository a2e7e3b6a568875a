use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwnet_data::{
    evaluate, generate_dataset, list_dataset, load_labeled, read_ppm, reports_to_csv,
    split_dataset, write_ppm, LabeledImage, MetricsReport, SceneSpec, MAR_THRESHOLDS,
};
use uwnet_detector::{
    build_model, evaluate_detector, fit, predict, AnchorSet, DetectorModel, EpochRecord,
    ModelMeta, TrainConfig, VariantSpec, ALL_VARIANTS,
};
use uwnet_ssl::{
    augment_pair, collapse_metric, export_backbone, pretrain_step, AugmentationSpec,
    PretrainConfig, SiameseModel,
};
use uwnet_tensor::optim::Adam;
use uwnet_tensor::{checkpoint, ParamSet};

use crate::error::{CliError, CliResult};
use crate::gradcheck::{negative_control, run_suite, TOLERANCE};
use crate::render::render_detections;
use crate::table::{sweep_to_csv, threshold_sweep};

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_split(dir: &Path, ids: &[u64]) -> CliResult<Vec<LabeledImage>> {
    ids.iter().map(|&id| load_labeled(dir, id).map_err(CliError::from)).collect()
}

// ---------------------------------------------------------------- gen

pub struct GenOpts {
    pub out: PathBuf,
    pub count: u64,
    pub size: usize,
    pub classes: usize,
    pub seed: u64,
}

pub fn cmd_gen(o: &GenOpts) -> CliResult<(usize, usize)> {
    if o.size % 32 != 0 {
        return Err(CliError::Usage(format!(
            "image size {} must be a multiple of 32 (backbone stride)",
            o.size
        )));
    }
    let spec = SceneSpec { size: o.size, classes: o.classes, seed: o.seed, ..SceneSpec::default() };
    generate_dataset(&spec, o.count, &o.out)?;
    let (train, val) = split_dataset(&o.out, o.seed)?;
    println!(
        "generated {} images ({}x{}, {} classes) under {}: {} train / {} val",
        o.count,
        o.size,
        o.size,
        o.classes,
        o.out.display(),
        train.len(),
        val.len()
    );
    Ok((train.len(), val.len()))
}

// ----------------------------------------------------------- pretrain

pub struct PretrainOpts {
    pub data: PathBuf,
    pub out: PathBuf,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub out_size: usize,
    pub seed: u64,
    /// Cap on the number of images drawn from the dataset, 0 = all.
    pub limit: usize,
}

pub fn cmd_pretrain(o: &PretrainOpts) -> CliResult<(f64, f64)> {
    let cfg = PretrainConfig { lr: o.lr, batch_size: o.batch_size, epochs: o.epochs };
    cfg.validate()?;
    let aug = AugmentationSpec { out_size: o.out_size, ..AugmentationSpec::default() };
    aug.validate()?;
    if o.out_size % 32 != 0 {
        return Err(CliError::Usage(format!(
            "augmented view size {} must be a multiple of 32",
            o.out_size
        )));
    }

    let mut ids = list_dataset(&o.data)?;
    if o.limit > 0 {
        ids.truncate(o.limit);
    }
    if ids.is_empty() {
        return Err(CliError::Usage(format!("no images found under {}", o.data.display())));
    }
    let images: Vec<_> = ids
        .iter()
        .map(|&id| load_labeled(&o.data, id).map(|li| li.image))
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let model: SiameseModel<f32> = SiameseModel::new(&mut rng);
    let params = model.params();
    let mut opt = Adam::new(cfg.lr as f32);

    let (mut first_mean, mut last_mean) = (0.0, 0.0);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..images.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(o.seed);
        shuffle_rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut shuffle_rng);

        let (mut sum, mut steps) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let pairs: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    // one augmentation stream per (epoch, batch, slot)
                    let s = o.seed ^ ((epoch as u64) << 40 | (b as u64) << 20 | i as u64);
                    augment_pair(&images[i], &aug, s)
                })
                .collect::<Result<_, _>>()?;
            sum += pretrain_step(&model, &params, &pairs, &mut opt)?;
            steps += 1;
        }
        let mean = sum / steps.max(1) as f64;
        if epoch == 0 {
            first_mean = mean;
        }
        last_mean = mean;
        let probe: Vec<_> = images.iter().take(16).collect();
        let spread = collapse_metric(&model, &probe)?;
        println!("epoch {epoch}: loss {mean:.4}, embedding spread {spread:.4}");
    }

    export_backbone(&model, &o.out)?;
    println!("backbone weights written to {}", o.out.display());
    Ok((first_mean, last_mean))
}

// -------------------------------------------------------------- train

pub struct TrainOpts {
    pub data: PathBuf,
    pub out: PathBuf,
    pub variant: String,
    pub width: usize,
    pub classes: usize,
    pub cfg: TrainConfig,
    pub init_backbone: Option<PathBuf>,
}

/// K-means anchors from the training boxes when there are enough of them,
/// otherwise the built-in defaults.
fn fit_anchors(train: &[LabeledImage]) -> AnchorSet {
    let whs: Vec<(f64, f64)> = train
        .iter()
        .flat_map(|li| li.labels.iter().map(|(b, _)| (b.w, b.h)))
        .collect();
    AnchorSet::kmeans(&whs).unwrap_or_default()
}

pub fn cmd_train(o: &TrainOpts) -> CliResult<Vec<EpochRecord>> {
    let variant = VariantSpec::parse(&o.variant)?;
    o.cfg.validate()?;
    let (train_ids, val_ids) = split_dataset(&o.data, o.cfg.seed)?;
    let train = load_split(&o.data, &train_ids)?;
    let val = load_split(&o.data, &val_ids)?;

    let anchors = fit_anchors(&train);
    let mut rng = ChaCha8Rng::seed_from_u64(o.cfg.seed);
    let model: DetectorModel<f32> =
        build_model(&mut rng, variant, o.classes, o.width, anchors.clone())?;
    let params = model.params();

    if let Some(path) = &o.init_backbone {
        let report = checkpoint::load_matching(path, &params)?;
        println!(
            "initialized {} parameters from {} ({} names in the file had no match)",
            report.matched.len(),
            path.display(),
            report.unmatched_in_file.len()
        );
    }

    std::fs::create_dir_all(&o.out).map_err(|e| CliError::Io(format!("{}: {e}", o.out.display())))?;
    let ckpt = o.out.join("model.ckpt");
    let meta = ModelMeta {
        variant: variant.name().to_string(),
        num_classes: o.classes,
        width: o.width,
        anchors,
    };
    meta.save(&o.out.join("model.json"))?;

    let log_path = o.out.join("train_log.jsonl");
    let mut log = std::fs::File::create(&log_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", log_path.display())))?;
    let mut on_epoch = |r: &EpochRecord| {
        println!(
            "epoch {}: box {:.4} conf {:.4} class {:.4} total {:.4} mAP {:.4}",
            r.epoch, r.l_re, r.l_co, r.l_cl, r.total, r.map
        );
        let line = serde_json::to_string(r).expect("record serialization");
        let _ = writeln!(log, "{line}");
    };
    let records = fit(&model, &params, &train, &val, &o.cfg, Some(&ckpt), &mut on_epoch)?;
    println!(
        "best checkpoint at {} (validation mAP {:.4})",
        ckpt.display(),
        records.iter().map(|r| r.map).fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(records)
}

// --------------------------------------------------------------- eval

pub struct EvalOpts {
    pub data: PathBuf,
    pub model_dir: PathBuf,
    pub out: Option<PathBuf>,
    pub split: String,
    pub conf: f64,
    pub nms: f64,
    pub seed: u64,
}

/// Rebuilds the model described by `dir/model.json` and strictly loads
/// `dir/model.ckpt` into it.
pub fn load_model(dir: &Path) -> CliResult<(DetectorModel<f32>, ParamSet<f32>)> {
    let meta_path = dir.join("model.json");
    if !meta_path.exists() {
        return Err(CliError::Io(format!("{}: no such file", meta_path.display())));
    }
    let meta = ModelMeta::load(&meta_path)?;
    let variant = VariantSpec::parse(&meta.variant)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = build_model(&mut rng, variant, meta.num_classes, meta.width, meta.anchors)?;
    let params = model.params();
    checkpoint::load_into(dir.join("model.ckpt"), &params)?;
    Ok((model, params))
}

pub fn cmd_eval(o: &EvalOpts) -> CliResult<MetricsReport> {
    let (model, _params) = load_model(&o.model_dir)?;
    let (train_ids, val_ids) = split_dataset(&o.data, o.seed)?;
    let ids: Vec<u64> = match o.split.as_str() {
        "train" => train_ids,
        "val" => val_ids,
        "all" => list_dataset(&o.data)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown split '{other}', expected train, val or all"
            )))
        }
    };
    let set = load_split(&o.data, &ids)?;

    let refs: Vec<_> = set.iter().map(|li| &li.image).collect();
    let preds = predict(&model, &refs, o.conf, o.nms)?;
    let gts: Vec<_> = set.iter().map(|li| li.labels.clone()).collect();
    let report = evaluate(model.variant.name(), &preds, &gts, model.num_classes)?;
    let sweep = threshold_sweep(&preds, &gts, model.num_classes, &MAR_THRESHOLDS);

    println!(
        "{} on {} '{}' images: mAP@0.5 {:.4}, mAR {:.4}",
        report.model, report.images, o.split, report.map50, report.mar
    );
    if let Some(out) = &o.out {
        write_file(&out.join("report.json"), &report.to_json())?;
        write_file(&out.join("report.csv"), &reports_to_csv(std::slice::from_ref(&report)))?;
        write_file(&out.join("sweep.csv"), &sweep_to_csv(&sweep))?;
        println!("reports written under {}", out.display());
    }
    Ok(report)
}

// ------------------------------------------------------------- ablate

pub struct AblateOpts {
    pub data: PathBuf,
    pub out: PathBuf,
    pub width: usize,
    pub classes: usize,
    pub cfg: TrainConfig,
}

/// Trains every model variant from the same seed on the same split and
/// reports validation mAP/mAR per variant.
pub fn cmd_ablate(o: &AblateOpts) -> CliResult<Vec<MetricsReport>> {
    o.cfg.validate()?;
    let (train_ids, val_ids) = split_dataset(&o.data, o.cfg.seed)?;
    let train = load_split(&o.data, &train_ids)?;
    let val = load_split(&o.data, &val_ids)?;
    let anchors = fit_anchors(&train);

    let mut reports = Vec::with_capacity(ALL_VARIANTS.len());
    let mut csv = String::from("variant,composition,mAP,mAR\n");
    let mut sweep_csv = String::from("variant,iou_threshold,mAP,mAR\n");
    for variant in ALL_VARIANTS {
        let mut rng = ChaCha8Rng::seed_from_u64(o.cfg.seed);
        let model: DetectorModel<f32> =
            build_model(&mut rng, variant, o.classes, o.width, anchors.clone())?;
        let params = model.params();
        fit(&model, &params, &train, &val, &o.cfg, None, &mut |_| {})?;
        let report = evaluate_detector(&model, &val, o.cfg.conf_threshold, o.cfg.nms_threshold)?;

        let refs: Vec<_> = val.iter().map(|li| &li.image).collect();
        let preds = predict(&model, &refs, o.cfg.conf_threshold, o.cfg.nms_threshold)?;
        let gts: Vec<_> = val.iter().map(|li| li.labels.clone()).collect();
        for row in threshold_sweep(&preds, &gts, o.classes, &MAR_THRESHOLDS) {
            sweep_csv.push_str(&format!(
                "{},{:.2},{:.6},{:.6}\n",
                variant.name(),
                row.threshold,
                row.map,
                row.mar
            ));
        }

        csv.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            variant.name(),
            variant.composition(),
            report.map50,
            report.mar
        ));
        println!(
            "{:<10} {:<24} mAP {:.4}  mAR {:.4}",
            variant.name(),
            variant.composition(),
            report.map50,
            report.mar
        );
        reports.push(report);
    }
    write_file(&o.out.join("ablation.csv"), &csv)?;
    write_file(&o.out.join("ablation_sweep.csv"), &sweep_csv)?;
    println!("tables written under {}", o.out.display());
    Ok(reports)
}

// ------------------------------------------------------------- render

pub struct RenderOpts {
    pub model_dir: PathBuf,
    /// Either a dataset directory plus image id, or a bare PPM file.
    pub data: Option<PathBuf>,
    pub id: u64,
    pub image: Option<PathBuf>,
    pub out: PathBuf,
    pub conf: f64,
    pub nms: f64,
}

pub fn cmd_render(o: &RenderOpts) -> CliResult<usize> {
    let (model, _params) = load_model(&o.model_dir)?;
    let (image, labels) = match (&o.data, &o.image) {
        (Some(dir), None) => {
            let li = load_labeled(dir, o.id)?;
            (li.image, li.labels)
        }
        (None, Some(path)) => (read_ppm(path)?, Vec::new()),
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --data (with --id) or --image".to_string(),
            ))
        }
    };
    let preds = predict(&model, &[&image], o.conf, o.nms)?;
    let dets = &preds[0];
    let rendered = render_detections(&image, dets, &labels, model.num_classes);
    write_ppm(&o.out, &rendered)?;
    println!(
        "{} detections, {} ground-truth boxes -> {}",
        dets.len(),
        labels.len(),
        o.out.display()
    );
    Ok(dets.len())
}

// ---------------------------------------------------------- gradcheck

pub fn cmd_gradcheck() -> CliResult<()> {
    let reports = run_suite()?;
    let mut failed = false;
    for r in &reports {
        let verdict = if r.pass() { "pass" } else { "FAIL" };
        println!("{:<22} rel err {:>10.3e}  {}", r.op, r.err, verdict);
        failed |= !r.pass();
    }
    let control = negative_control()?;
    let caught = control >= TOLERANCE;
    println!(
        "{:<22} rel err {:>10.3e}  {}",
        "negative_control",
        control,
        if caught { "caught (expected failure)" } else { "NOT CAUGHT" }
    );
    if failed {
        return Err(CliError::Verify("gradient check failed for at least one op".to_string()));
    }
    if !caught {
        return Err(CliError::Verify(
            "negative control passed the tolerance; the harness is not sensitive".to_string(),
        ));
    }
    println!("all {} ops within {:.0e}", reports.len(), TOLERANCE);
    Ok(())
}
