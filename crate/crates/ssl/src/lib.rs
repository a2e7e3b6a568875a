//! Self-supervised siamese pretraining: paired augmentation, the shared
//! encoder + predictor model, the symmetric stop-gradient training step,
//! a collapse monitor and backbone export for detector transfer.

mod augment;
mod model;

pub use augment::{augment_pair, AugmentationSpec};
pub use model::{
    collapse_metric, embedding_spread, export_backbone, images_to_tensor, pretrain_step,
    SiameseModel, EMBED_DIM, PRED_HIDDEN, PROJ_HIDDEN,
};

/// Pretraining hyperparameters; Adam is the fixed optimizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { lr: 1e-4, batch_size: 4, epochs: 5 }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> uwnet_tensor::Result<()> {
        if self.lr <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(uwnet_tensor::Error::invalid(
                "PretrainConfig",
                "learning rate, batch size and epochs must be positive",
            ));
        }
        Ok(())
    }
}
