use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::param::ParamSet;
use crate::scalar::Scalar;

/// A parameter-update rule: consumes the gradients accumulated on a
/// parameter set and updates the weights in place.
pub trait Optimizer<T: Scalar> {
    fn step(&mut self, params: &ParamSet<T>) -> Result<()>;
}

/// Stochastic gradient descent with classical momentum.
pub struct Sgd<T: Scalar> {
    pub lr: T,
    pub momentum: T,
    velocity: HashMap<String, Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: T, momentum: T) -> Self {
        Sgd { lr, momentum, velocity: HashMap::new() }
    }

    pub fn step(&mut self, params: &ParamSet<T>) -> Result<()> {
        for p in params.trainable() {
            let grad = p.tensor.grad().ok_or_else(|| Error::MissingGrad(p.name.clone()))?;
            let v = self
                .velocity
                .entry(p.name.clone())
                .or_insert_with(|| vec![T::zero(); grad.len()]);
            p.tensor.with_data_mut(|w| {
                for i in 0..w.len() {
                    v[i] = self.momentum * v[i] + grad[i];
                    w[i] = w[i] - self.lr * v[i];
                }
            });
        }
        Ok(())
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn step(&mut self, params: &ParamSet<T>) -> Result<()> {
        Sgd::step(self, params)
    }
}

/// Adam with bias correction; defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
pub struct Adam<T: Scalar> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: u64,
    m: HashMap<String, Vec<T>>,
    v: HashMap<String, Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T) -> Self {
        Adam {
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn step(&mut self, params: &ParamSet<T>) -> Result<()> {
        self.t += 1;
        let t = T::from_f64(self.t as f64);
        let bc1 = T::one() - self.beta1.powf(t);
        let bc2 = T::one() - self.beta2.powf(t);
        for p in params.trainable() {
            let grad = p.tensor.grad().ok_or_else(|| Error::MissingGrad(p.name.clone()))?;
            let m = self
                .m
                .entry(p.name.clone())
                .or_insert_with(|| vec![T::zero(); grad.len()]);
            let v = self
                .v
                .entry(p.name.clone())
                .or_insert_with(|| vec![T::zero(); grad.len()]);
            p.tensor.with_data_mut(|w| {
                for i in 0..w.len() {
                    m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * grad[i];
                    v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * grad[i] * grad[i];
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    w[i] = w[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
                }
            });
        }
        Ok(())
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &ParamSet<T>) -> Result<()> {
        Adam::step(self, params)
    }
}
