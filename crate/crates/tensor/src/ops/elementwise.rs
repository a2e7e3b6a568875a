use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tensor<T> {
    pub(crate) fn unary_op(
        &self,
        f: impl Fn(T) -> T,
        df: impl Fn(T) -> T + 'static,
    ) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        let input = self.clone();
        Tensor::from_op(self.shape(), data, vec![self.clone()], Box::new(move |gout| {
            let x = input.data();
            let gin: Vec<T> = x.iter().zip(gout).map(|(&xi, &g)| g * df(xi)).collect();
            drop(x);
            input.accumulate_grad(&gin);
        }))
    }

    pub(crate) fn binary_op(
        &self,
        other: &Tensor<T>,
        op: &'static str,
        f: impl Fn(T, T) -> T,
        df: impl Fn(T, T) -> (T, T) + 'static,
    ) -> Result<Tensor<T>> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { op, lhs: self.shape(), rhs: other.shape() });
        }
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        let (lhs, rhs) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            self.shape(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |gout| {
                let a = lhs.data();
                let b = rhs.data();
                let mut ga = vec![T::zero(); gout.len()];
                let mut gb = vec![T::zero(); gout.len()];
                for i in 0..gout.len() {
                    let (da, db) = df(a[i], b[i]);
                    ga[i] = gout[i] * da;
                    gb[i] = gout[i] * db;
                }
                drop(a);
                drop(b);
                lhs.accumulate_grad(&ga);
                rhs.accumulate_grad(&gb);
            }),
        ))
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(other, "add", |a, b| a + b, |_, _| (T::one(), T::one()))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(other, "sub", |a, b| a - b, |_, _| (T::one(), -T::one()))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(other, "mul", |a, b| a * b, |a, b| (b, a))
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(
            other,
            "div",
            |a, b| a / b,
            |a, b| (T::one() / b, -a / (b * b)),
        )
    }

    /// Elementwise maximum; ties route the gradient to the first operand.
    pub fn maximum(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(
            other,
            "maximum",
            |a, b| if a >= b { a } else { b },
            |a, b| if a >= b { (T::one(), T::zero()) } else { (T::zero(), T::one()) },
        )
    }

    /// Elementwise minimum; ties route the gradient to the first operand.
    pub fn minimum(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary_op(
            other,
            "minimum",
            |a, b| if a <= b { a } else { b },
            |a, b| if a <= b { (T::one(), T::zero()) } else { (T::zero(), T::one()) },
        )
    }

    pub fn neg(&self) -> Tensor<T> {
        self.unary_op(|x| -x, |_| -T::one())
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        self.unary_op(move |x| x * c, move |_| c)
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        self.unary_op(move |x| x + c, |_| T::one())
    }

    pub fn square(&self) -> Tensor<T> {
        self.unary_op(|x| x * x, |x| x + x)
    }

    pub fn sqrt_ew(&self) -> Tensor<T> {
        self.unary_op(
            |x| x.sqrt(),
            |x| {
                let half = T::from_f64(0.5);
                half / x.sqrt()
            },
        )
    }

    pub fn ln_ew(&self) -> Tensor<T> {
        self.unary_op(|x| x.ln(), |x| T::one() / x)
    }

    pub fn clamp_min(&self, lo: T) -> Tensor<T> {
        self.unary_op(
            move |x| if x < lo { lo } else { x },
            move |x| if x < lo { T::zero() } else { T::one() },
        )
    }

    pub fn clamp(&self, lo: T, hi: T) -> Tensor<T> {
        self.unary_op(
            move |x| {
                if x < lo {
                    lo
                } else if x > hi {
                    hi
                } else {
                    x
                }
            },
            move |x| if x < lo || x > hi { T::zero() } else { T::one() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary_op(sigmoid_val, |x| {
            let s = sigmoid_val(x);
            s * (T::one() - s)
        })
    }

    pub fn silu(&self) -> Tensor<T> {
        self.unary_op(
            |x| x * sigmoid_val(x),
            |x| {
                let s = sigmoid_val(x);
                s * (T::one() + x * (T::one() - s))
            },
        )
    }

    pub fn sum(&self) -> Tensor<T> {
        let total = self.data().iter().fold(T::zero(), |acc, &x| acc + x);
        let input = self.clone();
        let n = self.numel();
        Tensor::from_op(
            crate::shape::Shape::SCALAR,
            vec![total],
            vec![self.clone()],
            Box::new(move |gout| {
                input.accumulate_grad(&vec![gout[0]; n]);
            }),
        )
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = T::from_f64(self.numel() as f64);
        self.sum().scale(T::one() / n)
    }

    /// Spatial mean per (n, c): (N,C,H,W) -> (N,C,1,1).
    pub fn mean_spatial(&self) -> Tensor<T> {
        let s = self.shape();
        let hw = s.h * s.w;
        let inv = T::one() / T::from_f64(hw as f64);
        let mut out = vec![T::zero(); s.n * s.c];
        {
            let x = self.data();
            for nc in 0..s.n * s.c {
                let mut acc = T::zero();
                for i in 0..hw {
                    acc = acc + x[nc * hw + i];
                }
                out[nc] = acc * inv;
            }
        }
        let input = self.clone();
        Tensor::from_op(
            crate::shape::Shape::new(s.n, s.c, 1, 1),
            out,
            vec![self.clone()],
            Box::new(move |gout| {
                let mut gin = vec![T::zero(); s.numel()];
                for nc in 0..s.n * s.c {
                    let g = gout[nc] * inv;
                    for i in 0..hw {
                        gin[nc * hw + i] = g;
                    }
                }
                input.accumulate_grad(&gin);
            }),
        )
    }

    /// Normalize each sample's full (C·H·W) vector to unit length,
    /// dividing by max(‖v‖, eps).
    pub fn l2_normalize(&self, eps: T) -> Tensor<T> {
        let s = self.shape();
        let d = s.c * s.h * s.w;
        let mut out = vec![T::zero(); s.numel()];
        let mut norms = vec![T::zero(); s.n];
        {
            let x = self.data();
            for n in 0..s.n {
                let v = &x[n * d..(n + 1) * d];
                let mut sq = T::zero();
                for &xi in v {
                    sq = sq + xi * xi;
                }
                let norm = sq.sqrt().max(eps);
                norms[n] = norm;
                for i in 0..d {
                    out[n * d + i] = v[i] / norm;
                }
            }
        }
        let input = self.clone();
        let out_copy = out.clone();
        Tensor::from_op(
            s,
            out,
            vec![self.clone()],
            Box::new(move |gout| {
                let x = input.data();
                let mut gin = vec![T::zero(); x.len()];
                for n in 0..s.n {
                    let norm = norms[n];
                    let y = &out_copy[n * d..(n + 1) * d];
                    let g = &gout[n * d..(n + 1) * d];
                    let mut sq = T::zero();
                    for &xi in &x[n * d..(n + 1) * d] {
                        sq = sq + xi * xi;
                    }
                    if sq.sqrt() < eps {
                        // below the eps floor the map is linear: x / eps
                        for i in 0..d {
                            gin[n * d + i] = g[i] / norm;
                        }
                    } else {
                        let mut dot = T::zero();
                        for i in 0..d {
                            dot = dot + y[i] * g[i];
                        }
                        for i in 0..d {
                            gin[n * d + i] = (g[i] - y[i] * dot) / norm;
                        }
                    }
                }
                drop(x);
                input.accumulate_grad(&gin);
            }),
        )
    }
}

#[inline]
fn sigmoid_val<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
