//! Dense rank-4 (N,C,H,W) tensors with define-by-run reverse-mode
//! automatic differentiation, the numeric substrate of the detection
//! toolkit. f64 is used for verification, f32 for training runs.

mod error;
mod norm;
mod ops;
mod param;
mod scalar;
mod shape;
mod tensor;

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;

pub use error::{Error, Result};
pub use norm::BatchNorm2d;
pub use ops::{bilinear_sample, concat_channels, conv2d, matmul, maxpool2d};
pub use param::{ParamSet, Parameter};
pub use scalar::{DType, Scalar};
pub use shape::Shape;
pub use tensor::Tensor;
