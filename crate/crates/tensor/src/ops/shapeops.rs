use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Concatenate along the channel axis, preserving input order.
pub fn concat_channels<T: Scalar>(inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
    if inputs.is_empty() {
        return Err(Error::invalid("concat_channels", "no inputs"));
    }
    let first = inputs[0].shape();
    let mut c_total = 0;
    for t in inputs {
        let s = t.shape();
        if s.n != first.n || s.h != first.h || s.w != first.w {
            return Err(Error::ShapeMismatch { op: "concat_channels", lhs: first, rhs: s });
        }
        c_total += s.c;
    }
    let out_shape = Shape::new(first.n, c_total, first.h, first.w);
    let hw = first.h * first.w;
    let mut out = vec![T::zero(); out_shape.numel()];
    let mut c_off = 0;
    for t in inputs {
        let s = t.shape();
        let d = t.data();
        for n in 0..s.n {
            let src = &d[n * s.c * hw..(n + 1) * s.c * hw];
            let dst = out_shape.idx(n, c_off, 0, 0);
            out[dst..dst + s.c * hw].copy_from_slice(src);
        }
        c_off += s.c;
    }
    let parents: Vec<Tensor<T>> = inputs.to_vec();
    let owned = parents.clone();
    Ok(Tensor::from_op(out_shape, out, parents, Box::new(move |gout| {
        let mut c_off = 0;
        for t in &owned {
            let s = t.shape();
            if t.requires_grad() {
                let mut g = vec![T::zero(); s.numel()];
                for n in 0..s.n {
                    let src = out_shape.idx(n, c_off, 0, 0);
                    g[n * s.c * hw..(n + 1) * s.c * hw]
                        .copy_from_slice(&gout[src..src + s.c * hw]);
                }
                t.accumulate_grad(&g);
            }
            c_off += s.c;
        }
    })))
}

impl<T: Scalar> Tensor<T> {
    /// Copy the channel range [from, to).
    pub fn slice_channels(&self, from: usize, to: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if from >= to || to > s.c {
            return Err(Error::invalid(
                "slice_channels",
                format!("range {from}..{to} invalid for {} channels", s.c),
            ));
        }
        let out_shape = Shape::new(s.n, to - from, s.h, s.w);
        let hw = s.h * s.w;
        let mut out = vec![T::zero(); out_shape.numel()];
        {
            let d = self.data();
            for n in 0..s.n {
                let src = s.idx(n, from, 0, 0);
                let dst = out_shape.idx(n, 0, 0, 0);
                out[dst..dst + (to - from) * hw].copy_from_slice(&d[src..src + (to - from) * hw]);
            }
        }
        let input = self.clone();
        Ok(Tensor::from_op(out_shape, out, vec![self.clone()], Box::new(move |gout| {
            let mut g = vec![T::zero(); s.numel()];
            for n in 0..s.n {
                let dst = s.idx(n, from, 0, 0);
                let src = out_shape.idx(n, 0, 0, 0);
                g[dst..dst + (to - from) * hw].copy_from_slice(&gout[src..src + (to - from) * hw]);
            }
            input.accumulate_grad(&g);
        })))
    }

    /// Nearest-neighbor 2x spatial upsampling.
    pub fn nearest_upsample2x(&self) -> Tensor<T> {
        let s = self.shape();
        let out_shape = Shape::new(s.n, s.c, s.h * 2, s.w * 2);
        let mut out = vec![T::zero(); out_shape.numel()];
        {
            let d = self.data();
            for n in 0..s.n {
                for c in 0..s.c {
                    for h in 0..s.h {
                        for w in 0..s.w {
                            let v = d[s.idx(n, c, h, w)];
                            out[out_shape.idx(n, c, 2 * h, 2 * w)] = v;
                            out[out_shape.idx(n, c, 2 * h, 2 * w + 1)] = v;
                            out[out_shape.idx(n, c, 2 * h + 1, 2 * w)] = v;
                            out[out_shape.idx(n, c, 2 * h + 1, 2 * w + 1)] = v;
                        }
                    }
                }
            }
        }
        let input = self.clone();
        Tensor::from_op(out_shape, out, vec![self.clone()], Box::new(move |gout| {
            let mut g = vec![T::zero(); s.numel()];
            for n in 0..s.n {
                for c in 0..s.c {
                    for h in 0..s.h {
                        for w in 0..s.w {
                            let acc = gout[out_shape.idx(n, c, 2 * h, 2 * w)]
                                + gout[out_shape.idx(n, c, 2 * h, 2 * w + 1)]
                                + gout[out_shape.idx(n, c, 2 * h + 1, 2 * w)]
                                + gout[out_shape.idx(n, c, 2 * h + 1, 2 * w + 1)];
                            g[s.idx(n, c, h, w)] = acc;
                        }
                    }
                }
            }
            input.accumulate_grad(&g);
        }))
    }

    /// Pick elements at flat indices, producing a (1,1,1,L) tensor.
    /// Backward scatter-adds into the source.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor<T>> {
        let numel = self.numel();
        if let Some(&bad) = indices.iter().find(|&&i| i >= numel) {
            return Err(Error::invalid(
                "gather",
                format!("index {bad} out of range for {numel} elements"),
            ));
        }
        let out_shape = Shape::new(1, 1, 1, indices.len());
        let data: Vec<T> = {
            let d = self.data();
            indices.iter().map(|&i| d[i]).collect()
        };
        let input = self.clone();
        let idx: Vec<usize> = indices.to_vec();
        Ok(Tensor::from_op(out_shape, data, vec![self.clone()], Box::new(move |gout| {
            let mut g = vec![T::zero(); numel];
            for (k, &i) in idx.iter().enumerate() {
                g[i] = g[i] + gout[k];
            }
            input.accumulate_grad(&g);
        })))
    }

    /// Reinterpret the buffer with a new shape of equal element count.
    pub fn reshape(&self, shape: Shape) -> Result<Tensor<T>> {
        if shape.numel() != self.numel() {
            return Err(Error::ShapeMismatch { op: "reshape", lhs: self.shape(), rhs: shape });
        }
        let input = self.clone();
        Ok(Tensor::from_op(shape, self.to_vec(), vec![self.clone()], Box::new(move |gout| {
            input.accumulate_grad(gout);
        })))
    }
}
