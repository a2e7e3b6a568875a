//! Network building blocks: conv/batch-norm/SiLU units, the shared-weight
//! trident block, pyramid pooling (plain and trident variants), deformable
//! convolution, the path-aggregation neck and a compact backbone.
//!
//! Every module exposes `forward`, a `register` method that pushes its
//! tensors into a [`uwnet_tensor::ParamSet`] under a dotted name prefix,
//! and takes a seeded RNG at construction for reproducible initialization.

mod backbone;
mod blocks;
mod deform;
mod init;
mod neck;
mod sppf;
mod tdconv;

pub use backbone::Backbone;
pub use blocks::{register_bn_params, Conv2dLayer, ConvBlock, Linear, ResidualBlock};
pub use deform::DeformConvModule;
pub use init::{const_bias, kaiming_conv, zeros_leaf};
pub use neck::{C5Input, DPAFPNNeck, FuseNode, NeckConfig, PostBlock};
pub use sppf::{SPPFModule, TDSPPFModule};
pub use tdconv::TDConvModule;
