use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

fn out_extent(input: usize, k: usize, stride: usize, padding: usize, dilation: usize) -> isize {
    let span = dilation * (k - 1) + 1;
    (input as isize + 2 * padding as isize - span as isize) / stride as isize + 1
}

/// Range lo..hi of output columns oww whose input column
/// iw = oww*stride + off stays inside [0, w_in).
fn col_range(w_in: usize, ow: usize, stride: usize, off: isize) -> (usize, usize) {
    let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(stride) };
    let hi = if (w_in as isize) <= off {
        0
    } else {
        (((w_in as isize - 1 - off) / stride as isize) as usize + 1).min(ow)
    };
    (lo.min(hi), hi)
}

/// 2-D convolution over NCHW with zero padding and dilation.
///
/// `weight` is (C_out, C_in, k_h, k_w). Output spatial size follows
/// floor((H + 2p − d·(k−1) − 1)/s) + 1.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Result<Tensor<T>> {
    let xs = input.shape();
    let ws = weight.shape();
    if stride < 1 || dilation < 1 {
        return Err(Error::invalid("conv2d", format!("stride {stride} and dilation {dilation} must be >= 1")));
    }
    if xs.c != ws.c {
        return Err(Error::ShapeMismatch { op: "conv2d", lhs: xs, rhs: ws });
    }
    if let Some(b) = bias {
        if b.numel() != ws.n {
            return Err(Error::ShapeMismatch { op: "conv2d bias", lhs: b.shape(), rhs: ws });
        }
    }
    let oh = out_extent(xs.h, ws.h, stride, padding, dilation);
    let ow = out_extent(xs.w, ws.w, stride, padding, dilation);
    if oh <= 0 || ow <= 0 {
        return Err(Error::invalid(
            "conv2d",
            format!("output size {oh}x{ow} <= 0 for input {xs} weight {ws} stride {stride} pad {padding} dilation {dilation}"),
        ));
    }
    let (oh, ow) = (oh as usize, ow as usize);
    let out_shape = Shape::new(xs.n, ws.n, oh, ow);

    let mut out = vec![T::zero(); out_shape.numel()];
    {
        let x = input.data();
        let w = weight.data();
        let bdata = bias.map(|b| b.to_vec());
        let x: &[T] = &x;
        let w: &[T] = &w;
        out.par_chunks_mut(oh * ow).enumerate().for_each(|(nco, chunk)| {
            let n = nco / ws.n;
            let co = nco % ws.n;
            let b0 = bdata.as_ref().map_or(T::zero(), |b| b[co]);
            chunk.fill(b0);
            for ci in 0..xs.c {
                for kh in 0..ws.h {
                    let wrow = ws.idx(co, ci, kh, 0);
                    for ohh in 0..oh {
                        let ih = (ohh * stride + kh * dilation) as isize - padding as isize;
                        if ih < 0 || ih >= xs.h as isize {
                            continue;
                        }
                        let xrow = xs.idx(n, ci, ih as usize, 0);
                        let orow = ohh * ow;
                        for kw in 0..ws.w {
                            let wv = w[wrow + kw];
                            let off = (kw * dilation) as isize - padding as isize;
                            let (lo, hi) = col_range(xs.w, ow, stride, off);
                            if lo >= hi {
                                continue;
                            }
                            if stride == 1 {
                                // contiguous row: lets the compiler vectorize
                                let base = (xrow as isize + lo as isize + off) as usize;
                                let xr = &x[base..base + (hi - lo)];
                                let or = &mut chunk[orow + lo..orow + hi];
                                for (o, &xv) in or.iter_mut().zip(xr) {
                                    *o = *o + wv * xv;
                                }
                            } else {
                                for oww in lo..hi {
                                    let iw = (oww * stride) as isize + off;
                                    chunk[orow + oww] =
                                        chunk[orow + oww] + wv * x[(xrow as isize + iw) as usize];
                                }
                            }
                        }
                    }
                }
            }
        });
    }

    let mut parents = vec![input.clone(), weight.clone()];
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    let (xt, wt) = (input.clone(), weight.clone());
    let bt = bias.cloned();
    Ok(Tensor::from_op(out_shape, out, parents, Box::new(move |gout| {
        let x = xt.data();
        let w = wt.data();
        let x: &[T] = &x;
        let w: &[T] = &w;

        // d/d input: each (n, ci) plane is independent
        if xt.requires_grad() {
            let mut gin = vec![T::zero(); xs.numel()];
            gin.par_chunks_mut(xs.h * xs.w).enumerate().for_each(|(nci, plane)| {
                let n = nci / xs.c;
                let ci = nci % xs.c;
                for co in 0..ws.n {
                    for kh in 0..ws.h {
                        let wrow = ws.idx(co, ci, kh, 0);
                        for ohh in 0..oh {
                            let ih = (ohh * stride + kh * dilation) as isize - padding as isize;
                            if ih < 0 || ih >= xs.h as isize {
                                continue;
                            }
                            let grow = out_shape.idx(n, co, ohh, 0);
                            let irow = ih as usize * xs.w;
                            for kw in 0..ws.w {
                                let wv = w[wrow + kw];
                                let off = (kw * dilation) as isize - padding as isize;
                                let (lo, hi) = col_range(xs.w, ow, stride, off);
                                if lo >= hi {
                                    continue;
                                }
                                if stride == 1 {
                                    let gr = &gout[grow + lo..grow + hi];
                                    let base = (irow as isize + lo as isize + off) as usize;
                                    let pr = &mut plane[base..base + gr.len()];
                                    for (p, &g) in pr.iter_mut().zip(gr) {
                                        *p = *p + wv * g;
                                    }
                                } else {
                                    for oww in lo..hi {
                                        let iw = (oww * stride) as isize + off;
                                        let idx = (irow as isize + iw) as usize;
                                        plane[idx] = plane[idx] + wv * gout[grow + oww];
                                    }
                                }
                            }
                        }
                    }
                }
            });
            xt.accumulate_grad(&gin);
        }

        // d/d weight: each co row is independent
        if wt.requires_grad() {
            let mut gw = vec![T::zero(); ws.numel()];
            gw.par_chunks_mut(ws.c * ws.h * ws.w).enumerate().for_each(|(co, wchunk)| {
                for n in 0..xs.n {
                    for ci in 0..xs.c {
                        for kh in 0..ws.h {
                            for ohh in 0..oh {
                                let ih = (ohh * stride + kh * dilation) as isize - padding as isize;
                                if ih < 0 || ih >= xs.h as isize {
                                    continue;
                                }
                                let xrow = xs.idx(n, ci, ih as usize, 0);
                                let grow = out_shape.idx(n, co, ohh, 0);
                                for kw in 0..ws.w {
                                    let off = (kw * dilation) as isize - padding as isize;
                                    let (lo, hi) = col_range(xs.w, ow, stride, off);
                                    if lo >= hi {
                                        continue;
                                    }
                                    let mut acc = T::zero();
                                    if stride == 1 {
                                        let base = (xrow as isize + lo as isize + off) as usize;
                                        let xr = &x[base..base + (hi - lo)];
                                        let gr = &gout[grow + lo..grow + hi];
                                        for (&xv, &g) in xr.iter().zip(gr) {
                                            acc = acc + xv * g;
                                        }
                                    } else {
                                        for oww in lo..hi {
                                            let iw = (oww * stride) as isize + off;
                                            acc = acc
                                                + x[(xrow as isize + iw) as usize] * gout[grow + oww];
                                        }
                                    }
                                    let wi = (ci * ws.h + kh) * ws.w + kw;
                                    wchunk[wi] = wchunk[wi] + acc;
                                }
                            }
                        }
                    }
                }
            });
            wt.accumulate_grad(&gw);
        }

        if let Some(b) = &bt {
            if b.requires_grad() {
                let mut gb = vec![T::zero(); ws.n];
                for n in 0..xs.n {
                    for co in 0..ws.n {
                        let row = out_shape.idx(n, co, 0, 0);
                        for i in 0..oh * ow {
                            gb[co] = gb[co] + gout[row + i];
                        }
                    }
                }
                b.accumulate_grad(&gb);
            }
        }
    })))
}
