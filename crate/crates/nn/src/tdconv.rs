use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{conv2d, BatchNorm2d, Error, ParamSet, Result, Scalar, Tensor};

use crate::blocks::register_bn_params;
use crate::init::kaiming_conv;

/// Trident block: one shared k x k weight applied at three dilation rates,
/// branch outputs averaged, then shared batch-norm and SiLU. Trainable
/// parameter count equals that of a single conv block by construction.
pub struct TDConvModule<T: Scalar> {
    pub weight: Tensor<T>,
    pub bn: BatchNorm2d<T>,
    pub dilations: (usize, usize, usize),
    k: usize,
}

impl<T: Scalar> TDConvModule<T> {
    pub fn new(
        rng: &mut ChaCha8Rng,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        dilations: (usize, usize, usize),
    ) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::invalid(
                "TDConvModule",
                format!("kernel size {k} must be odd for symmetric per-branch padding"),
            ));
        }
        Ok(TDConvModule {
            weight: kaiming_conv(rng, out_ch, in_ch, k),
            bn: BatchNorm2d::new(out_ch),
            dilations,
            k,
        })
    }

    /// Single-layer receptive span for dilation d: d*(k-1)+1 pixels.
    pub fn branch_span(&self, d: usize) -> usize {
        d * (self.k - 1) + 1
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let ds = [self.dilations.0, self.dilations.1, self.dilations.2];
        let mut merged: Option<Tensor<T>> = None;
        for d in ds {
            let pad = d * (self.k - 1) / 2;
            let y = conv2d(x, &self.weight, None, 1, pad, d)?;
            merged = Some(match merged {
                None => y,
                Some(acc) => acc.add(&y)?,
            });
        }
        let avg = merged.unwrap().scale(T::from_f64(1.0 / 3.0));
        Ok(self.bn.forward(&avg, training)?.silu())
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        params.push(format!("{prefix}.conv.weight"), self.weight.clone(), true)?;
        register_bn_params(&self.bn, params, &format!("{prefix}.bn"))
    }
}
