use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Per-channel batch normalization over (N,H,W) with running statistics.
///
/// Training mode normalizes with batch statistics and updates the running
/// buffers (momentum 0.1 convention: new = (1−m)·old + m·batch); eval mode
/// normalizes with the running buffers.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub eps: T,
    channels: usize,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> BatchNorm2d<T> {
        let cshape = Shape::new(1, channels, 1, 1);
        BatchNorm2d {
            gamma: Tensor::leaf(cshape, vec![T::one(); channels]).unwrap(),
            beta: Tensor::leaf(cshape, vec![T::zero(); channels]).unwrap(),
            running_mean: Tensor::constant(cshape, vec![T::zero(); channels]).unwrap(),
            running_var: Tensor::constant(cshape, vec![T::one(); channels]).unwrap(),
            momentum: T::from_f64(0.1),
            eps: T::from_f64(1e-5),
            channels,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.c != self.channels {
            return Err(Error::ShapeMismatch { op: "batchnorm2d", lhs: s, rhs: self.gamma.shape() });
        }
        if training {
            self.forward_train(x)
        } else {
            self.forward_eval(x)
        }
    }

    fn forward_train(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        let c_count = s.c;
        let m = s.n * s.h * s.w;
        if m == 0 {
            return Err(Error::invalid("batchnorm2d", "empty batch"));
        }
        let m_t = T::from_f64(m as f64);

        let mut mean = vec![T::zero(); c_count];
        let mut var = vec![T::zero(); c_count];
        let mut xhat = vec![T::zero(); s.numel()];
        {
            let d = x.data();
            for c in 0..c_count {
                let mut acc = T::zero();
                for n in 0..s.n {
                    let base = s.idx(n, c, 0, 0);
                    for i in 0..s.h * s.w {
                        acc = acc + d[base + i];
                    }
                }
                mean[c] = acc / m_t;
                let mut vacc = T::zero();
                for n in 0..s.n {
                    let base = s.idx(n, c, 0, 0);
                    for i in 0..s.h * s.w {
                        let dv = d[base + i] - mean[c];
                        vacc = vacc + dv * dv;
                    }
                }
                var[c] = vacc / m_t;
            }
            let gam = self.gamma.data();
            let bet = self.beta.data();
            let mut out = vec![T::zero(); s.numel()];
            for c in 0..c_count {
                let inv_std = T::one() / (var[c] + self.eps).sqrt();
                for n in 0..s.n {
                    let base = s.idx(n, c, 0, 0);
                    for i in 0..s.h * s.w {
                        let xh = (d[base + i] - mean[c]) * inv_std;
                        xhat[base + i] = xh;
                        out[base + i] = gam[c] * xh + bet[c];
                    }
                }
            }
            drop(d);
            drop(gam);
            drop(bet);

            // running stats: unbiased variance when m > 1
            let mom = self.momentum;
            self.running_mean.with_data_mut(|rm| {
                for c in 0..c_count {
                    rm[c] = (T::one() - mom) * rm[c] + mom * mean[c];
                }
            });
            let unbias = if m > 1 { m_t / (m_t - T::one()) } else { T::one() };
            self.running_var.with_data_mut(|rv| {
                for c in 0..c_count {
                    rv[c] = (T::one() - mom) * rv[c] + mom * var[c] * unbias;
                }
            });

            let (xt, gt, bt) = (x.clone(), self.gamma.clone(), self.beta.clone());
            let eps = self.eps;
            Ok(Tensor::from_op(
                s,
                out,
                vec![x.clone(), self.gamma.clone(), self.beta.clone()],
                Box::new(move |gout| {
                    let gam = gt.data();
                    let mut dgamma = vec![T::zero(); c_count];
                    let mut dbeta = vec![T::zero(); c_count];
                    for c in 0..c_count {
                        for n in 0..s.n {
                            let base = s.idx(n, c, 0, 0);
                            for i in 0..s.h * s.w {
                                dgamma[c] = dgamma[c] + gout[base + i] * xhat[base + i];
                                dbeta[c] = dbeta[c] + gout[base + i];
                            }
                        }
                    }
                    if xt.requires_grad() {
                        let mut gin = vec![T::zero(); s.numel()];
                        for c in 0..c_count {
                            let inv_std = T::one() / (var[c] + eps).sqrt();
                            let k = gam[c] * inv_std / m_t;
                            for n in 0..s.n {
                                let base = s.idx(n, c, 0, 0);
                                for i in 0..s.h * s.w {
                                    gin[base + i] = k
                                        * (m_t * gout[base + i]
                                            - dbeta[c]
                                            - xhat[base + i] * dgamma[c]);
                                }
                            }
                        }
                        xt.accumulate_grad(&gin);
                    }
                    drop(gam);
                    gt.accumulate_grad(&dgamma);
                    bt.accumulate_grad(&dbeta);
                }),
            ))
        }
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        let c_count = s.c;
        let eps = self.eps;
        let rm = self.running_mean.to_vec();
        let rv = self.running_var.to_vec();
        let mut out = vec![T::zero(); s.numel()];
        let mut xhat = vec![T::zero(); s.numel()];
        {
            let d = x.data();
            let gam = self.gamma.data();
            let bet = self.beta.data();
            for c in 0..c_count {
                let inv_std = T::one() / (rv[c] + eps).sqrt();
                for n in 0..s.n {
                    let base = s.idx(n, c, 0, 0);
                    for i in 0..s.h * s.w {
                        let xh = (d[base + i] - rm[c]) * inv_std;
                        xhat[base + i] = xh;
                        out[base + i] = gam[c] * xh + bet[c];
                    }
                }
            }
        }
        let (xt, gt, bt) = (x.clone(), self.gamma.clone(), self.beta.clone());
        Ok(Tensor::from_op(
            s,
            out,
            vec![x.clone(), self.gamma.clone(), self.beta.clone()],
            Box::new(move |gout| {
                let gam = gt.data();
                if xt.requires_grad() {
                    let mut gin = vec![T::zero(); s.numel()];
                    for c in 0..c_count {
                        let inv_std = T::one() / (rv[c] + eps).sqrt();
                        let k = gam[c] * inv_std;
                        for n in 0..s.n {
                            let base = s.idx(n, c, 0, 0);
                            for i in 0..s.h * s.w {
                                gin[base + i] = k * gout[base + i];
                            }
                        }
                    }
                    xt.accumulate_grad(&gin);
                }
                let mut dgamma = vec![T::zero(); c_count];
                let mut dbeta = vec![T::zero(); c_count];
                for c in 0..c_count {
                    for n in 0..s.n {
                        let base = s.idx(n, c, 0, 0);
                        for i in 0..s.h * s.w {
                            dgamma[c] = dgamma[c] + gout[base + i] * xhat[base + i];
                            dbeta[c] = dbeta[c] + gout[base + i];
                        }
                    }
                }
                drop(gam);
                gt.accumulate_grad(&dgamma);
                bt.accumulate_grad(&dbeta);
            }),
        ))
    }
}
