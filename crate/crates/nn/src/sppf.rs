use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{concat_channels, maxpool2d, ParamSet, Result, Scalar, Tensor};

use crate::blocks::ConvBlock;
use crate::tdconv::TDConvModule;

/// Serial 5x5 stride-1 pad-2 pooling stack shared by both pyramid-pooling
/// variants. Concatenation order is (identity, pool, pool^2, pool^3).
fn pool_stack<T: Scalar>(x: &Tensor<T>, kernel: usize) -> Result<Tensor<T>> {
    let pad = (kernel - 1) / 2;
    let p1 = maxpool2d(x, kernel, 1, pad)?;
    let p2 = maxpool2d(&p1, kernel, 1, pad)?;
    let p3 = maxpool2d(&p2, kernel, 1, pad)?;
    concat_channels(&[x.clone(), p1, p2, p3])
}

/// Fast spatial pyramid pooling: input conv to a hidden width of out_ch/2,
/// three serial max pools, 4-way concat, output 1x1 conv.
pub struct SPPFModule<T: Scalar> {
    pub cv_in: ConvBlock<T>,
    pub cv_out: ConvBlock<T>,
    pub pool_kernel: usize,
}

impl<T: Scalar> SPPFModule<T> {
    pub fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Self {
        Self::with_input_kernel(rng, in_ch, out_ch, 1)
    }

    /// Input-conv kernel is configurable so degenerate comparisons against
    /// the trident variant can share geometry.
    pub fn with_input_kernel(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k_in: usize) -> Self {
        let hidden = out_ch / 2;
        SPPFModule {
            cv_in: ConvBlock::new(rng, in_ch, hidden, k_in, 1, 1),
            cv_out: ConvBlock::new(rng, hidden * 4, out_ch, 1, 1, 1),
            pool_kernel: 5,
        }
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let h = self.cv_in.forward(x, training)?;
        let cat = pool_stack(&h, self.pool_kernel)?;
        self.cv_out.forward(&cat, training)
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.cv_in.register(params, &format!("{prefix}.cv_in"))?;
        self.cv_out.register(params, &format!("{prefix}.cv_out"))
    }
}

/// Pyramid pooling with the trident block replacing the input conv; the
/// pooling stack and output conv match SPPFModule exactly.
pub struct TDSPPFModule<T: Scalar> {
    pub td_in: TDConvModule<T>,
    pub cv_out: ConvBlock<T>,
    pub pool_kernel: usize,
}

impl<T: Scalar> TDSPPFModule<T> {
    pub fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Result<Self> {
        let hidden = out_ch / 2;
        Ok(TDSPPFModule {
            td_in: TDConvModule::new(rng, in_ch, hidden, 3, (1, 2, 3))?,
            cv_out: ConvBlock::new(rng, hidden * 4, out_ch, 1, 1, 1),
            pool_kernel: 5,
        })
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let h = self.td_in.forward(x, training)?;
        let cat = pool_stack(&h, self.pool_kernel)?;
        self.cv_out.forward(&cat, training)
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.td_in.register(params, &format!("{prefix}.td_in"))?;
        self.cv_out.register(params, &format!("{prefix}.cv_out"))
    }
}
