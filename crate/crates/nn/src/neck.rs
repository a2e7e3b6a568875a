use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{concat_channels, BatchNorm2d, Error, ParamSet, Result, Scalar, Tensor};

use crate::blocks::{register_bn_params, ConvBlock};
use crate::deform::DeformConvModule;
use crate::sppf::{SPPFModule, TDSPPFModule};
use crate::tdconv::TDConvModule;

/// Which architectural features the neck enables. All false gives the
/// plain path-aggregation baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeckConfig {
    pub width: usize,
    pub tdconv: bool,
    pub tdsppf: bool,
    pub deform: bool,
}

/// Fusion conv after a concat node: deformable (followed by batch-norm and
/// SiLU) or a plain 3x3 conv block.
pub enum FuseNode<T: Scalar> {
    Deform { conv: DeformConvModule<T>, bn: BatchNorm2d<T> },
    Plain(ConvBlock<T>),
}

impl<T: Scalar> FuseNode<T> {
    fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, deform: bool) -> Result<Self> {
        Ok(if deform {
            FuseNode::Deform {
                conv: DeformConvModule::new(rng, in_ch, out_ch, 3)?,
                bn: BatchNorm2d::new(out_ch),
            }
        } else {
            FuseNode::Plain(ConvBlock::new(rng, in_ch, out_ch, 3, 1, 1))
        })
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        match self {
            FuseNode::Deform { conv, bn } => Ok(bn.forward(&conv.forward(x)?, training)?.silu()),
            FuseNode::Plain(b) => b.forward(x, training),
        }
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        match self {
            FuseNode::Deform { conv, bn } => {
                conv.register(params, prefix)?;
                register_bn_params(bn, params, &format!("{prefix}.bn"))
            }
            FuseNode::Plain(b) => b.register(params, prefix),
        }
    }
}

/// Output refinement on the two shallow pyramid levels: trident block or a
/// plain 3x3 conv block. Both variants share weight shapes and names.
pub enum PostBlock<T: Scalar> {
    Td(TDConvModule<T>),
    Plain(ConvBlock<T>),
}

impl<T: Scalar> PostBlock<T> {
    fn new(rng: &mut ChaCha8Rng, channels: usize, tdconv: bool) -> Result<Self> {
        Ok(if tdconv {
            PostBlock::Td(TDConvModule::new(rng, channels, channels, 3, (1, 2, 3))?)
        } else {
            PostBlock::Plain(ConvBlock::new(rng, channels, channels, 3, 1, 1))
        })
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        match self {
            PostBlock::Td(m) => m.forward(x, training),
            PostBlock::Plain(b) => b.forward(x, training),
        }
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        match self {
            PostBlock::Td(m) => m.register(params, prefix),
            PostBlock::Plain(b) => b.register(params, prefix),
        }
    }
}

/// Pyramid pooling on the deepest lateral path.
pub enum C5Input<T: Scalar> {
    Tdsppf(TDSPPFModule<T>),
    Sppf(SPPFModule<T>),
}

impl<T: Scalar> C5Input<T> {
    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        match self {
            C5Input::Tdsppf(m) => m.forward(x, training),
            C5Input::Sppf(m) => m.forward(x, training),
        }
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        match self {
            C5Input::Tdsppf(m) => m.register(params, prefix),
            C5Input::Sppf(m) => m.register(params, prefix),
        }
    }
}

/// Path-aggregation pyramid neck over backbone maps C3/C4/C5 at strides
/// 8/16/32. Top-down: upsample, concat with the lateral, fuse. Bottom-up:
/// stride-2 conv, concat, fuse. Output refinement sits on P3/P4; pyramid
/// pooling sits on the C5 lateral.
pub struct DPAFPNNeck<T: Scalar> {
    pub config: NeckConfig,
    pub lat3: ConvBlock<T>,
    pub lat4: ConvBlock<T>,
    pub c5_in: C5Input<T>,
    pub fuse_up1: FuseNode<T>,
    pub fuse_up0: FuseNode<T>,
    pub post_p3: PostBlock<T>,
    pub post_p4: PostBlock<T>,
    pub down0: ConvBlock<T>,
    pub down1: ConvBlock<T>,
    pub fuse_down0: FuseNode<T>,
    pub fuse_down1: FuseNode<T>,
}

impl<T: Scalar> DPAFPNNeck<T> {
    pub fn new(
        rng: &mut ChaCha8Rng,
        c3_ch: usize,
        c4_ch: usize,
        c5_ch: usize,
        config: NeckConfig,
    ) -> Result<Self> {
        let w = config.width;
        Ok(DPAFPNNeck {
            config,
            lat3: ConvBlock::new(rng, c3_ch, w, 1, 1, 1),
            lat4: ConvBlock::new(rng, c4_ch, w, 1, 1, 1),
            c5_in: if config.tdsppf {
                C5Input::Tdsppf(TDSPPFModule::new(rng, c5_ch, w)?)
            } else {
                C5Input::Sppf(SPPFModule::new(rng, c5_ch, w))
            },
            fuse_up1: FuseNode::new(rng, 2 * w, w, config.deform)?,
            fuse_up0: FuseNode::new(rng, 2 * w, w, config.deform)?,
            post_p3: PostBlock::new(rng, w, config.tdconv)?,
            post_p4: PostBlock::new(rng, w, config.tdconv)?,
            down0: ConvBlock::new(rng, w, w, 3, 2, 1),
            down1: ConvBlock::new(rng, w, w, 3, 2, 1),
            fuse_down0: FuseNode::new(rng, 2 * w, w, config.deform)?,
            fuse_down1: FuseNode::new(rng, 2 * w, w, config.deform)?,
        })
    }

    pub fn forward(
        &self,
        c3: &Tensor<T>,
        c4: &Tensor<T>,
        c5: &Tensor<T>,
        training: bool,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let (s3, s4, s5) = (c3.shape(), c4.shape(), c5.shape());
        if s3.h != 2 * s4.h || s3.w != 2 * s4.w || s4.h != 2 * s5.h || s4.w != 2 * s5.w {
            return Err(Error::invalid(
                "dpafpn_forward",
                format!("pyramid levels must halve spatially: {s3} {s4} {s5}"),
            ));
        }

        let l3 = self.lat3.forward(c3, training)?;
        let l4 = self.lat4.forward(c4, training)?;
        let t5 = self.c5_in.forward(c5, training)?;

        let m4 = self
            .fuse_up1
            .forward(&concat_channels(&[t5.nearest_upsample2x(), l4])?, training)?;
        let m3 = self
            .fuse_up0
            .forward(&concat_channels(&[m4.nearest_upsample2x(), l3])?, training)?;

        let p3 = self.post_p3.forward(&m3, training)?;

        let d3 = self.down0.forward(&m3, training)?;
        let n4 = self.fuse_down0.forward(&concat_channels(&[d3, m4])?, training)?;
        let p4 = self.post_p4.forward(&n4, training)?;

        let d4 = self.down1.forward(&n4, training)?;
        let p5 = self.fuse_down1.forward(&concat_channels(&[d4, t5])?, training)?;

        Ok((p3, p4, p5))
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.lat3.register(params, &format!("{prefix}.lat3"))?;
        self.lat4.register(params, &format!("{prefix}.lat4"))?;
        self.c5_in.register(params, &format!("{prefix}.c5_in"))?;
        self.fuse_up1.register(params, &format!("{prefix}.fuse_up1"))?;
        self.fuse_up0.register(params, &format!("{prefix}.fuse_up0"))?;
        self.post_p3.register(params, &format!("{prefix}.post_p3"))?;
        self.post_p4.register(params, &format!("{prefix}.post_p4"))?;
        self.down0.register(params, &format!("{prefix}.down0"))?;
        self.down1.register(params, &format!("{prefix}.down1"))?;
        self.fuse_down0.register(params, &format!("{prefix}.fuse_down0"))?;
        self.fuse_down1.register(params, &format!("{prefix}.fuse_down1"))
    }
}
