use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{conv2d, matmul, BatchNorm2d, ParamSet, Result, Scalar, Shape, Tensor};

use crate::init::{kaiming_conv, zeros_leaf};

/// Pushes the four batch-norm tensors (affine pair trainable, running
/// statistics frozen) under the given prefix.
pub fn register_bn_params<T: Scalar>(
    bn: &BatchNorm2d<T>,
    params: &mut ParamSet<T>,
    prefix: &str,
) -> Result<()> {
    params.push(format!("{prefix}.weight"), bn.gamma.clone(), true)?;
    params.push(format!("{prefix}.bias"), bn.beta.clone(), true)?;
    params.push(format!("{prefix}.running_mean"), bn.running_mean.clone(), false)?;
    params.push(format!("{prefix}.running_var"), bn.running_var.clone(), false)?;
    Ok(())
}

/// Plain convolution with bias, no normalization. Used for prediction
/// heads and offset predictors where raw outputs are needed.
pub struct Conv2dLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl<T: Scalar> Conv2dLayer<T> {
    pub fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k: usize, stride: usize) -> Self {
        Conv2dLayer {
            weight: kaiming_conv(rng, out_ch, in_ch, k),
            bias: zeros_leaf(Shape::new(1, out_ch, 1, 1)),
            stride,
            padding: (k - 1) / 2,
            dilation: 1,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.weight, Some(&self.bias), self.stride, self.padding, self.dilation)
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        params.push(format!("{prefix}.weight"), self.weight.clone(), true)?;
        params.push(format!("{prefix}.bias"), self.bias.clone(), true)
    }
}

/// Conv + batch-norm + SiLU, the generic unit of the network diagrams.
/// Padding keeps spatial size at stride 1 for odd kernels.
pub struct ConvBlock<T: Scalar> {
    pub weight: Tensor<T>,
    pub bn: BatchNorm2d<T>,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new(
        rng: &mut ChaCha8Rng,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        dilation: usize,
    ) -> Self {
        ConvBlock {
            weight: kaiming_conv(rng, out_ch, in_ch, k),
            bn: BatchNorm2d::new(out_ch),
            stride,
            padding: dilation * (k - 1) / 2,
            dilation,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let y = conv2d(x, &self.weight, None, self.stride, self.padding, self.dilation)?;
        Ok(self.bn.forward(&y, training)?.silu())
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        params.push(format!("{prefix}.conv.weight"), self.weight.clone(), true)?;
        register_bn_params(&self.bn, params, &format!("{prefix}.bn"))
    }
}

/// Two 3x3 conv blocks with an identity skip; channel count is preserved.
pub struct ResidualBlock<T: Scalar> {
    pub c1: ConvBlock<T>,
    pub c2: ConvBlock<T>,
}

impl<T: Scalar> ResidualBlock<T> {
    pub fn new(rng: &mut ChaCha8Rng, channels: usize) -> Self {
        ResidualBlock {
            c1: ConvBlock::new(rng, channels, channels, 3, 1, 1),
            c2: ConvBlock::new(rng, channels, channels, 3, 1, 1),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let y = self.c2.forward(&self.c1.forward(x, training)?, training)?;
        x.add(&y)
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        self.c1.register(params, &format!("{prefix}.c1"))?;
        self.c2.register(params, &format!("{prefix}.c2"))
    }
}

/// Fully connected layer on (N,D,1,1) feature vectors.
pub struct Linear<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, bias: bool) -> Self {
        Linear {
            weight: kaiming_conv(rng, out_dim, in_dim, 1),
            bias: bias.then(|| zeros_leaf(Shape::new(1, out_dim, 1, 1))),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        matmul(x, &self.weight, self.bias.as_ref())
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        params.push(format!("{prefix}.weight"), self.weight.clone(), true)?;
        if let Some(b) = &self.bias {
            params.push(format!("{prefix}.bias"), b.clone(), true)?;
        }
        Ok(())
    }
}
