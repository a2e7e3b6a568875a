use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Max pooling with −∞ padding fill; gradient routes to the argmax cell,
/// first occurrence in row-major window scan on ties.
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    if kernel < 1 || stride < 1 {
        return Err(Error::invalid("maxpool2d", format!("kernel {kernel} and stride {stride} must be >= 1")));
    }
    let xs = input.shape();
    let oh = (xs.h as isize + 2 * padding as isize - kernel as isize) / stride as isize + 1;
    let ow = (xs.w as isize + 2 * padding as isize - kernel as isize) / stride as isize + 1;
    if oh <= 0 || ow <= 0 {
        return Err(Error::invalid(
            "maxpool2d",
            format!("output size {oh}x{ow} <= 0 for input {xs} kernel {kernel}"),
        ));
    }
    let (oh, ow) = (oh as usize, ow as usize);
    let out_shape = Shape::new(xs.n, xs.c, oh, ow);

    let mut out = vec![T::zero(); out_shape.numel()];
    let mut argmax = vec![usize::MAX; out_shape.numel()];
    {
        let x = input.data();
        for n in 0..xs.n {
            for c in 0..xs.c {
                for ohh in 0..oh {
                    for oww in 0..ow {
                        let mut best = T::neg_infinity();
                        let mut best_idx = usize::MAX;
                        for kh in 0..kernel {
                            let ih = (ohh * stride + kh) as isize - padding as isize;
                            if ih < 0 || ih >= xs.h as isize {
                                continue;
                            }
                            for kw in 0..kernel {
                                let iw = (oww * stride + kw) as isize - padding as isize;
                                if iw < 0 || iw >= xs.w as isize {
                                    continue;
                                }
                                let idx = xs.idx(n, c, ih as usize, iw as usize);
                                if x[idx] > best {
                                    best = x[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        let o = out_shape.idx(n, c, ohh, oww);
                        out[o] = best;
                        argmax[o] = best_idx;
                    }
                }
            }
        }
    }

    let xt = input.clone();
    Ok(Tensor::from_op(out_shape, out, vec![input.clone()], Box::new(move |gout| {
        let mut gin = vec![T::zero(); xs.numel()];
        for (o, &idx) in argmax.iter().enumerate() {
            if idx != usize::MAX {
                gin[idx] = gin[idx] + gout[o];
            }
        }
        xt.accumulate_grad(&gin);
    })))
}
