use rand_chacha::ChaCha8Rng;
use uwnet_data::Image;
use uwnet_loss::simsiam_loss;
use uwnet_nn::{Backbone, Linear};
use uwnet_tensor::optim::Optimizer;
use uwnet_tensor::{checkpoint, BatchNorm2d, Error, ParamSet, Result, Scalar, Shape, Tensor};

pub const PROJ_HIDDEN: usize = 256;
pub const EMBED_DIM: usize = 128;
pub const PRED_HIDDEN: usize = 64;

/// Siamese pretraining network: one shared encoder (backbone, spatial mean
/// pool, projection MLP) applied to both views, plus the prediction MLP.
pub struct SiameseModel<T: Scalar> {
    pub backbone: Backbone<T>,
    proj1: Linear<T>,
    proj_bn: BatchNorm2d<T>,
    proj2: Linear<T>,
    pred1: Linear<T>,
    pred_bn: BatchNorm2d<T>,
    pred2: Linear<T>,
}

impl<T: Scalar> SiameseModel<T> {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let backbone = Backbone::new(rng);
        let (_, _, c5) = backbone.out_channels();
        SiameseModel {
            backbone,
            proj1: Linear::new(rng, c5, PROJ_HIDDEN, true),
            proj_bn: BatchNorm2d::new(PROJ_HIDDEN),
            proj2: Linear::new(rng, PROJ_HIDDEN, EMBED_DIM, true),
            pred1: Linear::new(rng, EMBED_DIM, PRED_HIDDEN, true),
            pred_bn: BatchNorm2d::new(PRED_HIDDEN),
            pred2: Linear::new(rng, PRED_HIDDEN, EMBED_DIM, true),
        }
    }

    /// z = f(x): backbone, spatial mean over the deepest map, projector.
    pub fn encode(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let (_, _, c5) = self.backbone.forward(x, training)?;
        let pooled = c5.mean_spatial();
        let h = self.proj1.forward(&pooled)?;
        let h = self.proj_bn.forward(&h, training)?.silu();
        self.proj2.forward(&h)
    }

    /// p = h(z): the two-layer prediction MLP.
    pub fn predict(&self, z: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let h = self.pred1.forward(z)?;
        let h = self.pred_bn.forward(&h, training)?.silu();
        self.pred2.forward(&h)
    }

    pub fn params(&self) -> ParamSet<T> {
        let mut p = ParamSet::new();
        self.register(&mut p).expect("unique parameter names");
        p
    }

    pub fn register(&self, params: &mut ParamSet<T>) -> Result<()> {
        self.backbone.register(params, "backbone")?;
        self.proj1.register(params, "projector.fc1")?;
        uwnet_nn::register_bn_params(&self.proj_bn, params, "projector.bn")?;
        self.proj2.register(params, "projector.fc2")?;
        self.pred1.register(params, "predictor.fc1")?;
        uwnet_nn::register_bn_params(&self.pred_bn, params, "predictor.bn")?;
        self.pred2.register(params, "predictor.fc2")
    }
}

/// Stacks CHW images into an NCHW tensor, converting to the model scalar.
pub fn images_to_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    if images.is_empty() {
        return Err(Error::invalid("images_to_tensor", "empty batch"));
    }
    let (w, h) = (images[0].w, images[0].h);
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.w != w || img.h != h {
            return Err(Error::invalid(
                "images_to_tensor",
                format!("mixed sizes {}x{} vs {w}x{h}", img.w, img.h),
            ));
        }
        data.extend(img.data.iter().map(|&v| T::from_f64(v as f64)));
    }
    Tensor::leaf(Shape::new(images.len(), 3, h, w), data)
}

/// One symmetric-loss optimization step over a batch of view pairs.
/// Returns the scalar loss (mean over the batch, in [-1, 1]).
pub fn pretrain_step<T: Scalar, O: Optimizer<T>>(
    model: &SiameseModel<T>,
    params: &ParamSet<T>,
    batch: &[(Image, Image)],
    opt: &mut O,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("pretrain_step", "empty batch"));
    }
    let xa = images_to_tensor(&batch.iter().map(|(a, _)| a).collect::<Vec<_>>())?;
    let xb = images_to_tensor(&batch.iter().map(|(_, b)| b).collect::<Vec<_>>())?;
    if xa.shape() != xb.shape() {
        return Err(Error::ShapeMismatch { op: "pretrain_step", lhs: xa.shape(), rhs: xb.shape() });
    }

    let za = model.encode(&xa, true)?;
    let zb = model.encode(&xb, true)?;
    let pa = model.predict(&za, true)?;
    let pb = model.predict(&zb, true)?;
    let loss = simsiam_loss(&pa, &pb, &za, &zb)?;

    params.zero_grad();
    loss.backward()?;
    opt.step(params)?;
    Ok(loss.item().to_f64())
}

/// Mean per-dimension standard deviation of the l2-normalized embeddings
/// across the batch; near 1/sqrt(D) when representations do not collapse.
pub fn collapse_metric<T: Scalar>(model: &SiameseModel<T>, images: &[&Image]) -> Result<f64> {
    if images.len() < 2 {
        return Err(Error::invalid("collapse_metric", "need at least 2 images"));
    }
    let x = images_to_tensor::<T>(images)?;
    let z = model.encode(&x, false)?.l2_normalize(T::from_f64(1e-12));
    let rows: Vec<f64> = z.to_vec().into_iter().map(Scalar::to_f64).collect();
    embedding_spread(&rows, images.len())
}

/// Spread of N stacked D-dim rows: mean over dims of the per-dim std.
pub fn embedding_spread(rows: &[f64], n: usize) -> Result<f64> {
    if n < 2 || rows.len() % n != 0 {
        return Err(Error::invalid("embedding_spread", "need at least 2 equal-length rows"));
    }
    let d = rows.len() / n;
    let mut total = 0.0;
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| rows[i * d + j]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        total += var.sqrt();
    }
    Ok(total / d as f64)
}

/// Writes only the encoder backbone subtree for transfer into a detector.
pub fn export_backbone<T: Scalar>(model: &SiameseModel<T>, path: &std::path::Path) -> Result<()> {
    checkpoint::save(path, &model.params().subtree("backbone"))
}
