use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named model parameter. Non-trainable entries (running statistics)
/// still round-trip through checkpoints.
pub struct Parameter<T: Scalar> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub trainable: bool,
}

impl<T: Scalar> Clone for Parameter<T> {
    fn clone(&self) -> Self {
        Parameter {
            name: self.name.clone(),
            tensor: self.tensor.clone(),
            trainable: self.trainable,
        }
    }
}

/// Ordered collection of uniquely named parameters.
pub struct ParamSet<T: Scalar> {
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        ParamSet { params: Vec::new(), index: HashMap::new() }
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>, trainable: bool) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Parameter { name, tensor, trainable });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn trainable(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter().filter(|p| p.trainable)
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// Total element count of trainable parameters.
    pub fn trainable_count(&self) -> usize {
        self.trainable().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.tensor.zero_grad();
        }
    }

    /// Sub-collection whose names start with `prefix`.
    pub fn subtree(&self, prefix: &str) -> ParamSet<T> {
        let mut out = ParamSet::new();
        for p in &self.params {
            if p.name.starts_with(prefix) {
                out.push(p.name.clone(), p.tensor.clone(), p.trainable).unwrap();
            }
        }
        out
    }
}
