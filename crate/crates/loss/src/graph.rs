//! Differentiable loss graphs built on the tensor engine.

use uwnet_tensor::{Error, Result, Scalar, Tensor};

const NORM_EPS: f64 = 1e-12;
const PROB_EPS: f64 = 1e-7;
const ENCLOSE_EPS: f64 = 1e-9;

/// Negative cosine similarity, averaged over the batch dimension.
/// Inputs are (N,D,1,1); the result is a scalar in [−1, 1].
pub fn neg_cosine<T: Scalar>(p: &Tensor<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
    if p.shape() != z.shape() {
        return Err(Error::ShapeMismatch { op: "neg_cosine", lhs: p.shape(), rhs: z.shape() });
    }
    let n = p.shape().n;
    let pn = p.l2_normalize(T::from_f64(NORM_EPS));
    let zn = z.l2_normalize(T::from_f64(NORM_EPS));
    Ok(pn.mul(&zn)?.sum().scale(T::from_f64(-1.0 / n as f64)))
}

/// Symmetric SimSiam objective: ½·D(pA, stopgrad(zB)) + ½·D(pB, stopgrad(zA)).
/// Gradients flow through the predictor branches only.
pub fn simsiam_loss<T: Scalar>(
    p_a: &Tensor<T>,
    p_b: &Tensor<T>,
    z_a: &Tensor<T>,
    z_b: &Tensor<T>,
) -> Result<Tensor<T>> {
    let half = T::from_f64(0.5);
    let d1 = neg_cosine(p_a, &z_b.stop_gradient())?;
    let d2 = neg_cosine(p_b, &z_a.stop_gradient())?;
    d1.scale(half).add(&d2.scale(half))
}

/// Elementwise EIoU from box components in center format. All eight
/// tensors share a shape; the result holds one EIoU value per entry.
#[allow(clippy::too_many_arguments)]
pub fn eiou_components<T: Scalar>(
    pcx: &Tensor<T>,
    pcy: &Tensor<T>,
    pw: &Tensor<T>,
    ph: &Tensor<T>,
    tcx: &Tensor<T>,
    tcy: &Tensor<T>,
    tw: &Tensor<T>,
    th: &Tensor<T>,
) -> Result<Tensor<T>> {
    let half = T::from_f64(0.5);
    let eps = T::from_f64(ENCLOSE_EPS);

    let px1 = pcx.sub(&pw.scale(half))?;
    let px2 = pcx.add(&pw.scale(half))?;
    let py1 = pcy.sub(&ph.scale(half))?;
    let py2 = pcy.add(&ph.scale(half))?;
    let tx1 = tcx.sub(&tw.scale(half))?;
    let tx2 = tcx.add(&tw.scale(half))?;
    let ty1 = tcy.sub(&th.scale(half))?;
    let ty2 = tcy.add(&th.scale(half))?;

    let iw = px2.minimum(&tx2)?.sub(&px1.maximum(&tx1)?)?.clamp_min(T::zero());
    let ih = py2.minimum(&ty2)?.sub(&py1.maximum(&ty1)?)?.clamp_min(T::zero());
    let inter = iw.mul(&ih)?;
    let union = pw.mul(ph)?.add(&tw.mul(th)?)?.sub(&inter)?;
    let iou = inter.div(&union.clamp_min(eps))?;

    let cw = px2.maximum(&tx2)?.sub(&px1.minimum(&tx1)?)?;
    let ch = py2.maximum(&ty2)?.sub(&py1.minimum(&ty1)?)?;
    let cw2 = cw.square();
    let ch2 = ch.square();
    let c2 = cw2.add(&ch2)?.clamp_min(eps);

    let center = pcx.sub(tcx)?.square().add(&pcy.sub(tcy)?.square())?;
    let wpen = pw.sub(tw)?.square().div(&cw2.clamp_min(eps))?;
    let hpen = ph.sub(th)?.square().div(&ch2.clamp_min(eps))?;

    iou.sub(&center.div(&c2)?)?.sub(&wpen)?.sub(&hpen)
}

/// Elementwise 1 − EIoU.
#[allow(clippy::too_many_arguments)]
pub fn eiou_loss_components<T: Scalar>(
    pcx: &Tensor<T>,
    pcy: &Tensor<T>,
    pw: &Tensor<T>,
    ph: &Tensor<T>,
    tcx: &Tensor<T>,
    tcy: &Tensor<T>,
    tw: &Tensor<T>,
    th: &Tensor<T>,
) -> Result<Tensor<T>> {
    Ok(eiou_components(pcx, pcy, pw, ph, tcx, tcy, tw, th)?
        .neg()
        .add_scalar(T::one()))
}

/// Summed binary cross-entropy between probability tensors, with the
/// predictions clamped to [ε, 1−ε], ε = 1e-7.
pub fn bce_sum<T: Scalar>(pred_probs: &Tensor<T>, target_probs: &Tensor<T>) -> Result<Tensor<T>> {
    if pred_probs.shape() != target_probs.shape() {
        return Err(Error::ShapeMismatch {
            op: "bce",
            lhs: pred_probs.shape(),
            rhs: target_probs.shape(),
        });
    }
    let eps = T::from_f64(PROB_EPS);
    let p = pred_probs.clamp(eps, T::one() - eps);
    let pos = target_probs.mul(&p.ln_ew())?;
    let neg = target_probs
        .neg()
        .add_scalar(T::one())
        .mul(&p.neg().add_scalar(T::one()).ln_ew())?;
    Ok(pos.add(&neg)?.sum().neg())
}

/// Objectness loss (summed BCE over all predicted boxes). Targets must be
/// exactly 0 or 1.
pub fn confidence_loss<T: Scalar>(pred_conf: &Tensor<T>, target_conf: &Tensor<T>) -> Result<Tensor<T>> {
    for &t in target_conf.data().iter() {
        if t != T::zero() && t != T::one() {
            return Err(Error::invalid(
                "confidence_loss",
                format!("target {t} outside {{0, 1}}"),
            ));
        }
    }
    bce_sum(pred_conf, target_conf)
}

/// Per-class sigmoid (multi-label) classification loss over positive
/// samples: summed BCE across samples and classes.
pub fn classification_loss<T: Scalar>(
    pred_probs: &Tensor<T>,
    target_probs: &Tensor<T>,
) -> Result<Tensor<T>> {
    bce_sum(pred_probs, target_probs)
}

/// The three component losses and their plain unweighted sum.
pub struct LossBreakdown<T: Scalar> {
    pub l_re: Tensor<T>,
    pub l_co: Tensor<T>,
    pub l_cl: Tensor<T>,
    pub total: Tensor<T>,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn values(&self) -> (f64, f64, f64, f64) {
        (
            self.l_re.item().to_f64(),
            self.l_co.item().to_f64(),
            self.l_cl.item().to_f64(),
            self.total.item().to_f64(),
        )
    }
}

/// L = L_re + L_co + L_cl, with optional component weights for training
/// pragmatics (default (1,1,1) reproduces the printed sum exactly).
pub fn total_loss<T: Scalar>(
    l_re: Tensor<T>,
    l_co: Tensor<T>,
    l_cl: Tensor<T>,
    weights: Option<(T, T, T)>,
) -> Result<LossBreakdown<T>> {
    let (wr, wo, wc) = weights.unwrap_or((T::one(), T::one(), T::one()));
    let total = l_re.scale(wr).add(&l_co.scale(wo))?.add(&l_cl.scale(wc))?;
    Ok(LossBreakdown { l_re, l_co, l_cl, total })
}
