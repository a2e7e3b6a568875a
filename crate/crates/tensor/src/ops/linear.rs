use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Fully connected layer on flattened samples: y[n,m] = Σ_k x[n,k]·w[m,k] + b[m].
///
/// `input` is (N,K,1,1), `weight` (M,K,1,1), optional bias (M,1,1,1);
/// output is (N,M,1,1).
pub fn matmul<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let xs = input.shape();
    let ws = weight.shape();
    if xs.h != 1 || xs.w != 1 || ws.h != 1 || ws.w != 1 || xs.c != ws.c {
        return Err(Error::ShapeMismatch { op: "matmul", lhs: xs, rhs: ws });
    }
    if let Some(b) = bias {
        if b.numel() != ws.n {
            return Err(Error::ShapeMismatch { op: "matmul bias", lhs: b.shape(), rhs: ws });
        }
    }
    let (n, k, m) = (xs.n, xs.c, ws.n);
    let out_shape = Shape::new(n, m, 1, 1);
    let mut out = vec![T::zero(); n * m];
    {
        let x = input.data();
        let w = weight.data();
        let b = bias.map(|b| b.to_vec());
        for i in 0..n {
            for j in 0..m {
                let mut acc = b.as_ref().map_or(T::zero(), |b| b[j]);
                for kk in 0..k {
                    acc = acc + x[i * k + kk] * w[j * k + kk];
                }
                out[i * m + j] = acc;
            }
        }
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
        if xt.requires_grad() {
            let mut gx = vec![T::zero(); n * k];
            for i in 0..n {
                for j in 0..m {
                    let g = gout[i * m + j];
                    for kk in 0..k {
                        gx[i * k + kk] = gx[i * k + kk] + g * w[j * k + kk];
                    }
                }
            }
            xt.accumulate_grad(&gx);
        }
        if wt.requires_grad() {
            let mut gw = vec![T::zero(); m * k];
            for i in 0..n {
                for j in 0..m {
                    let g = gout[i * m + j];
                    for kk in 0..k {
                        gw[j * k + kk] = gw[j * k + kk] + g * x[i * k + kk];
                    }
                }
            }
            wt.accumulate_grad(&gw);
        }
        if let Some(b) = &bt {
            if b.requires_grad() {
                let mut gb = vec![T::zero(); m];
                for i in 0..n {
                    for j in 0..m {
                        gb[j] = gb[j] + gout[i * m + j];
                    }
                }
                b.accumulate_grad(&gb);
            }
        }
    })))
}
