use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{bilinear_sample, conv2d, Error, ParamSet, Result, Scalar, Shape, Tensor};

use crate::init::{kaiming_conv, zeros_leaf};

/// Deformable convolution (v1, no modulation). A zero-initialized offset
/// predictor outputs 2 per-tap displacements per output location; sampling
/// happens at regular-grid position + offset via bilinear interpolation.
/// With zero offsets the forward reduces to a plain conv2d.
pub struct DeformConvModule<T: Scalar> {
    pub offset_weight: Tensor<T>,
    pub offset_bias: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    k: usize,
}

impl<T: Scalar> DeformConvModule<T> {
    pub fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::invalid(
                "DeformConvModule",
                format!("kernel size {k} must be odd"),
            ));
        }
        Ok(DeformConvModule {
            offset_weight: zeros_leaf(Shape::new(2 * k * k, in_ch, k, k)),
            offset_bias: zeros_leaf(Shape::new(1, 2 * k * k, 1, 1)),
            weight: kaiming_conv(rng, out_ch, in_ch, k),
            bias: zeros_leaf(Shape::new(1, out_ch, 1, 1)),
            k,
        })
    }

    pub fn kernel(&self) -> usize {
        self.k
    }

    /// Regular-grid sampling coordinates in feature pixel units, one
    /// (y, x) pair per kernel tap per output location.
    fn base_grid(&self, n: usize, h: usize, w: usize) -> Tensor<T> {
        let k = self.k;
        let pad = (k - 1) / 2;
        let shape = Shape::new(n, 2 * k * k, h, w);
        let mut data = vec![T::zero(); shape.numel()];
        for ni in 0..n {
            for p in 0..k * k {
                let (ky, kx) = (p / k, p % k);
                for oh in 0..h {
                    for ow in 0..w {
                        let y = oh as f64 + ky as f64 - pad as f64;
                        let x = ow as f64 + kx as f64 - pad as f64;
                        data[shape.idx(ni, 2 * p, oh, ow)] = T::from_f64(y);
                        data[shape.idx(ni, 2 * p + 1, oh, ow)] = T::from_f64(x);
                    }
                }
            }
        }
        Tensor::constant(shape, data).unwrap()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        let k = self.k;
        let pad = (k - 1) / 2;
        let offsets = conv2d(x, &self.offset_weight, Some(&self.offset_bias), 1, pad, 1)?;
        let points = offsets.add(&self.base_grid(s.n, s.h, s.w))?;
        let sampled = bilinear_sample(x, &points)?;
        let ws = self.weight.shape();
        let flat = self.weight.reshape(Shape::new(ws.n, ws.c * k * k, 1, 1))?;
        conv2d(&sampled, &flat, Some(&self.bias), 1, 0, 1)
    }

    pub fn register(&self, params: &mut ParamSet<T>, prefix: &str) -> Result<()> {
        params.push(format!("{prefix}.offset.weight"), self.offset_weight.clone(), true)?;
        params.push(format!("{prefix}.offset.bias"), self.offset_bias.clone(), true)?;
        params.push(format!("{prefix}.weight"), self.weight.clone(), true)?;
        params.push(format!("{prefix}.bias"), self.bias.clone(), true)
    }
}
