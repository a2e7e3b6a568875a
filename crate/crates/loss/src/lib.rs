//! Loss mathematics for the detection toolkit: the symmetric
//! negative-cosine objective for siamese pretraining, EIoU box regression,
//! and the BCE confidence/classification stack with their composite sum.
//!
//! Scalar (f64) box routines live in [`boxes`] for metric and suppression
//! code; differentiable graph versions live in [`graph`].

mod boxes;
mod graph;

pub use boxes::{eiou, eiou_loss, iou, regression_loss, BBox};
pub use graph::{
    bce_sum, classification_loss, confidence_loss, eiou_components, eiou_loss_components,
    neg_cosine, simsiam_loss, total_loss, LossBreakdown,
};
