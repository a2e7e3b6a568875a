use rand_chacha::ChaCha8Rng;
use uwnet_data::Image;
use uwnet_nn::{Backbone, Conv2dLayer, DPAFPNNeck, NeckConfig};
use uwnet_tensor::{Error, ParamSet, Result, Scalar, Shape, Tensor};

use crate::anchors::{AnchorSet, ANCHORS_PER_SCALE};
use crate::variant::VariantSpec;

/// Initial objectness bias: starts every cell near P(object) = σ(−4) ≈ 2%
/// so the confidence loss is small and stable from step one.
pub const OBJ_BIAS_INIT: f64 = -4.0;

/// Anchor-based three-scale detector: backbone, pyramid neck per variant,
/// and a 1x1 prediction head per scale emitting, for each anchor,
/// (tx, ty, tw, th, obj, one logit per class).
pub struct DetectorModel<T: Scalar> {
    pub variant: VariantSpec,
    pub num_classes: usize,
    pub anchors: AnchorSet,
    pub backbone: Backbone<T>,
    pub neck: DPAFPNNeck<T>,
    pub heads: [Conv2dLayer<T>; 3],
}

pub fn build_model<T: Scalar>(
    rng: &mut ChaCha8Rng,
    variant: VariantSpec,
    num_classes: usize,
    width: usize,
    anchors: AnchorSet,
) -> Result<DetectorModel<T>> {
    if num_classes < 1 {
        return Err(Error::invalid("build_model", "num_classes must be >= 1"));
    }
    if width < 2 || width % 2 != 0 {
        return Err(Error::invalid("build_model", format!("width {width} must be even and >= 2")));
    }
    anchors.validate()?;
    let backbone = Backbone::new(rng);
    let (c3, c4, c5) = backbone.out_channels();
    let neck = DPAFPNNeck::new(
        rng,
        c3,
        c4,
        c5,
        NeckConfig {
            width,
            tdconv: variant.tdconv,
            tdsppf: variant.tdsppf,
            deform: variant.dpafpn,
        },
    )?;
    let head_ch = ANCHORS_PER_SCALE * (5 + num_classes);
    let mut heads = [
        Conv2dLayer::new(rng, width, head_ch, 1, 1),
        Conv2dLayer::new(rng, width, head_ch, 1, 1),
        Conv2dLayer::new(rng, width, head_ch, 1, 1),
    ];
    for head in &mut heads {
        head.bias.with_data_mut(|b| {
            for a in 0..ANCHORS_PER_SCALE {
                b[a * (5 + num_classes) + 4] = T::from_f64(OBJ_BIAS_INIT);
            }
        });
    }
    Ok(DetectorModel { variant, num_classes, anchors, backbone, neck, heads })
}

impl<T: Scalar> DetectorModel<T> {
    pub fn head_channels(&self) -> usize {
        ANCHORS_PER_SCALE * (5 + self.num_classes)
    }

    /// Raw head maps at strides 8/16/32.
    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<[Tensor<T>; 3]> {
        let (c3, c4, c5) = self.backbone.forward(x, training)?;
        let (p3, p4, p5) = self.neck.forward(&c3, &c4, &c5, training)?;
        Ok([
            self.heads[0].forward(&p3)?,
            self.heads[1].forward(&p4)?,
            self.heads[2].forward(&p5)?,
        ])
    }

    pub fn register(&self, params: &mut ParamSet<T>) -> Result<()> {
        self.backbone.register(params, "backbone")?;
        self.neck.register(params, "neck")?;
        self.heads[0].register(params, "head.p3")?;
        self.heads[1].register(params, "head.p4")?;
        self.heads[2].register(params, "head.p5")
    }

    pub fn params(&self) -> ParamSet<T> {
        let mut p = ParamSet::new();
        self.register(&mut p).expect("unique parameter names");
        p
    }
}

/// Stacks images into an NCHW batch; sides must be divisible by 32 so the
/// three pyramid grids are exact.
pub fn images_to_batch<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    if images.is_empty() {
        return Err(Error::invalid("images_to_batch", "empty batch"));
    }
    let (w, h) = (images[0].w, images[0].h);
    if w % 32 != 0 || h % 32 != 0 {
        return Err(Error::invalid(
            "images_to_batch",
            format!("image size {w}x{h} must be divisible by 32"),
        ));
    }
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.w != w || img.h != h {
            return Err(Error::invalid(
                "images_to_batch",
                format!("mixed sizes {}x{} vs {w}x{h}", img.w, img.h),
            ));
        }
        data.extend(img.data.iter().map(|&v| T::from_f64(v as f64)));
    }
    Tensor::leaf(Shape::new(images.len(), 3, h, w), data)
}
