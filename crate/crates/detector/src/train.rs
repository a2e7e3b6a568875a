use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uwnet_data::{evaluate, LabeledImage, MetricsReport};
use uwnet_loss::{classification_loss, confidence_loss, eiou_loss_components, total_loss, LossBreakdown};
use uwnet_tensor::optim::{Optimizer, Sgd};
use uwnet_tensor::{checkpoint, Error, ParamSet, Result, Scalar, Shape, Tensor};

use crate::anchors::ANCHORS_PER_SCALE;
use crate::assign::{assign_targets, Assignment};
use crate::decode::predict;
use crate::model::{images_to_batch, DetectorModel};

fn constant<T: Scalar>(values: Vec<f64>) -> Tensor<T> {
    let n = values.len();
    Tensor::constant(Shape::new(1, 1, 1, n), values.into_iter().map(T::from_f64).collect())
        .expect("constant shape")
}

fn zero_scalar<T: Scalar>() -> Tensor<T> {
    Tensor::constant(Shape::SCALAR, vec![T::zero()]).expect("scalar")
}

fn add_opt<T: Scalar>(acc: Option<Tensor<T>>, t: Tensor<T>) -> Result<Option<Tensor<T>>> {
    Ok(Some(match acc {
        Some(a) => a.add(&t)?,
        None => t,
    }))
}

/// One optimizer step over a labeled batch. The loss is the unweighted sum of
/// the mean box-regression loss over positives, the per-image mean summed
/// objectness cross-entropy, and the mean per-positive classification
/// cross-entropy.
pub fn train_step<T: Scalar, O: Optimizer<T>>(
    model: &DetectorModel<T>,
    params: &ParamSet<T>,
    batch: &[&LabeledImage],
    opt: &mut O,
) -> Result<LossBreakdown<T>> {
    train_step_weighted(model, params, batch, opt, None)
}

/// `train_step` with optional per-term weights (regression, objectness,
/// classification). The objectness term is a per-slot sum, so its gradient
/// dwarfs the averaged regression term; a larger regression weight rebalances
/// them. The reported component losses stay unweighted.
pub fn train_step_weighted<T: Scalar, O: Optimizer<T>>(
    model: &DetectorModel<T>,
    params: &ParamSet<T>,
    batch: &[&LabeledImage],
    opt: &mut O,
    weights: Option<(T, T, T)>,
) -> Result<LossBreakdown<T>> {
    if batch.is_empty() {
        return Err(Error::invalid("train_step", "empty batch"));
    }
    let images: Vec<_> = batch.iter().map(|li| &li.image).collect();
    let x = images_to_batch::<T>(&images)?;
    let raw = model.forward(&x, true)?;
    let breakdown = detection_loss(model, &raw, batch, weights)?;
    params.zero_grad();
    breakdown.total.backward()?;
    opt.step(params)?;
    Ok(breakdown)
}

/// The composite detection loss on raw head maps for a labeled batch.
/// Exposed separately from `train_step` so callers can train a sub-network
/// (for example the neck and heads on frozen backbone features).
pub fn detection_loss<T: Scalar>(
    model: &DetectorModel<T>,
    raw: &[Tensor<T>; 3],
    batch: &[&LabeledImage],
    weights: Option<(T, T, T)>,
) -> Result<LossBreakdown<T>> {
    if batch.is_empty() {
        return Err(Error::invalid("detection_loss", "empty batch"));
    }
    let grids = [
        (raw[0].shape().h, raw[0].shape().w),
        (raw[1].shape().h, raw[1].shape().w),
        (raw[2].shape().h, raw[2].shape().w),
    ];
    let k = model.num_classes;
    let fields = 5 + k;

    let mut positives: Vec<(usize, Assignment)> = Vec::new();
    for (n, li) in batch.iter().enumerate() {
        let assigned = assign_targets(&li.labels, &model.anchors, grids);
        positives.extend(assigned.positives.into_iter().map(|a| (n, a)));
    }
    let s_count = positives.len();

    // box regression and classification, gathered per scale
    let mut re_sum: Option<Tensor<T>> = None;
    let mut cl_sum: Option<Tensor<T>> = None;
    for s in 0..3 {
        let scale_pos: Vec<&(usize, Assignment)> =
            positives.iter().filter(|(_, a)| a.scale == s).collect();
        if scale_pos.is_empty() {
            continue;
        }
        let shape = raw[s].shape();
        let (gh, gw) = grids[s];
        let mut idx = [const { Vec::new() }; 4];
        let mut cols = Vec::new();
        let mut rows = Vec::new();
        let (mut aw, mut ah) = (Vec::new(), Vec::new());
        let (mut tcx, mut tcy, mut tw, mut th) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cls_idx = Vec::new();
        let mut cls_target = Vec::new();
        for &&(n, a) in &scale_pos {
            let base = a.anchor * fields;
            for (f, slot) in idx.iter_mut().enumerate() {
                slot.push(shape.idx(n, base + f, a.cell.0, a.cell.1));
            }
            cols.push(a.cell.1 as f64);
            rows.push(a.cell.0 as f64);
            let (w0, h0) = model.anchors.anchors[s][a.anchor];
            aw.push(w0);
            ah.push(h0);
            tcx.push(a.bbox.cx);
            tcy.push(a.bbox.cy);
            tw.push(a.bbox.w);
            th.push(a.bbox.h);
            for c in 0..k {
                cls_idx.push(shape.idx(n, base + 5 + c, a.cell.0, a.cell.1));
                cls_target.push(if c == a.class { 1.0 } else { 0.0 });
            }
        }

        let two = T::from_f64(2.0);
        let neg_half = T::from_f64(-0.5);
        let dec = |f: usize| -> Result<Tensor<T>> {
            Ok(raw[s].gather(&idx[f])?.sigmoid().scale(two).add_scalar(neg_half))
        };
        let pcx = dec(0)?.add(&constant(cols))?.scale(T::from_f64(1.0 / gw as f64));
        let pcy = dec(1)?.add(&constant(rows))?.scale(T::from_f64(1.0 / gh as f64));
        let pw = raw[s].gather(&idx[2])?.sigmoid().scale(two).square().mul(&constant(aw))?;
        let ph = raw[s].gather(&idx[3])?.sigmoid().scale(two).square().mul(&constant(ah))?;
        let re = eiou_loss_components(
            &pcx,
            &pcy,
            &pw,
            &ph,
            &constant(tcx),
            &constant(tcy),
            &constant(tw),
            &constant(th),
        )?
        .sum();
        re_sum = add_opt(re_sum, re)?;

        let cls_pred = raw[s].gather(&cls_idx)?.sigmoid();
        cl_sum = add_opt(cl_sum, classification_loss(&cls_pred, &constant(cls_target))?)?;
    }

    // objectness over every anchor slot of every cell
    let mut co_sum: Option<Tensor<T>> = None;
    for s in 0..3 {
        let shape = raw[s].shape();
        let (gh, gw) = grids[s];
        let slots = shape.n * ANCHORS_PER_SCALE * gh * gw;
        let mut obj_idx = Vec::with_capacity(slots);
        for n in 0..shape.n {
            for a in 0..ANCHORS_PER_SCALE {
                for row in 0..gh {
                    for col in 0..gw {
                        obj_idx.push(shape.idx(n, a * fields + 4, row, col));
                    }
                }
            }
        }
        let mut target = vec![0.0; slots];
        for &(n, a) in &positives {
            if a.scale == s {
                target[((n * ANCHORS_PER_SCALE + a.anchor) * gh + a.cell.0) * gw + a.cell.1] = 1.0;
            }
        }
        let pred = raw[s].gather(&obj_idx)?.sigmoid();
        co_sum = add_opt(co_sum, confidence_loss(&pred, &constant(target))?)?;
    }

    let inv_s = T::from_f64(1.0 / s_count.max(1) as f64);
    let l_re = re_sum.map_or_else(zero_scalar, |t| t.scale(inv_s));
    let l_cl = cl_sum.map_or_else(zero_scalar, |t| t.scale(inv_s));
    let l_co = co_sum.expect("three scales").scale(T::from_f64(1.0 / batch.len() as f64));

    total_loss(l_re, l_co, l_cl, weights)
}

/// Detector training hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub conf_threshold: f64,
    pub nms_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            momentum: 0.937,
            epochs: 10,
            batch_size: 4,
            conf_threshold: 0.25,
            nms_threshold: 0.45,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("TrainConfig", "need lr > 0 and momentum in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("TrainConfig", "epochs and batch_size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) || !(0.0..=1.0).contains(&self.nms_threshold) {
            return Err(Error::invalid("TrainConfig", "thresholds must be in [0, 1]"));
        }
        Ok(())
    }
}

/// One line of the per-epoch training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_re: f64,
    pub l_co: f64,
    pub l_cl: f64,
    pub total: f64,
    pub map: f64,
}

/// mAP/mAR report of eval-mode predictions over a labeled set.
pub fn evaluate_detector<T: Scalar>(
    model: &DetectorModel<T>,
    images: &[LabeledImage],
    conf_threshold: f64,
    nms_threshold: f64,
) -> Result<MetricsReport> {
    let refs: Vec<_> = images.iter().map(|li| &li.image).collect();
    let preds = predict(model, &refs, conf_threshold, nms_threshold)?;
    let gts: Vec<_> = images.iter().map(|li| li.labels.clone()).collect();
    evaluate(model.variant.name(), &preds, &gts, model.num_classes)
        .map_err(|e| Error::invalid("evaluate_detector", e.to_string()))
}

/// Epoch loop: shuffled batches, one validation pass per epoch, and an
/// optional best-mAP checkpoint. `on_epoch` sees every record in order.
pub fn fit<T: Scalar>(
    model: &DetectorModel<T>,
    params: &ParamSet<T>,
    train: &[LabeledImage],
    val: &[LabeledImage],
    cfg: &TrainConfig,
    best_ckpt: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("fit", "empty training set"));
    }
    let mut opt = Sgd::new(T::from_f64(cfg.lr), T::from_f64(cfg.momentum));
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_map = f64::NEG_INFINITY;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let (mut re, mut co, mut cl, mut to) = (0.0, 0.0, 0.0, 0.0);
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&LabeledImage> = chunk.iter().map(|&i| &train[i]).collect();
            let b = train_step(model, params, &batch, &mut opt)?;
            let (lre, lco, lcl, ltot) = b.values();
            re += lre;
            co += lco;
            cl += lcl;
            to += ltot;
            steps += 1;
        }
        let inv = 1.0 / steps.max(1) as f64;
        let report = evaluate_detector(model, val, cfg.conf_threshold, cfg.nms_threshold)?;
        let record = EpochRecord {
            epoch,
            l_re: re * inv,
            l_co: co * inv,
            l_cl: cl * inv,
            total: to * inv,
            map: report.map50,
        };
        if report.map50 > best_map {
            best_map = report.map50;
            if let Some(path) = best_ckpt {
                checkpoint::save(path, params)?;
            }
        }
        on_epoch(&record);
        records.push(record);
    }
    Ok(records)
}
