//! Anchor-based three-scale detector: feature-variant model construction,
//! target assignment, box decoding with suppression, the composite-loss
//! training step and the epoch loop with mAP tracking.

mod anchors;
mod assign;
mod decode;
mod model;
mod train;
mod variant;

use std::path::Path;

use serde::{Deserialize, Serialize};
use uwnet_tensor::{Error, Result};

pub use anchors::{AnchorSet, ANCHORS_PER_SCALE, STRIDES};
pub use assign::{
    assign_targets, encode_target, head_channel, ratio_score, Assignment, GridAssignment,
    RATIO_LIMIT,
};
pub use decode::{decode_predictions, nms, predict};
pub use model::{build_model, images_to_batch, DetectorModel, OBJ_BIAS_INIT};
pub use train::{
    detection_loss, evaluate_detector, fit, train_step, train_step_weighted, EpochRecord,
    TrainConfig,
};
pub use variant::{VariantSpec, ALL_VARIANTS, BASELINE, FULL, MODEL_A, MODEL_B, MODEL_C};

/// Everything needed to rebuild a model for a checkpoint: written next to
/// the weights as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub variant: String,
    pub num_classes: usize,
    pub width: usize,
    pub anchors: AnchorSet,
}

impl ModelMeta {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid("ModelMeta::save", e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::invalid("ModelMeta::save", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ModelMeta> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("ModelMeta::load", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid("ModelMeta::load", e.to_string()))
    }
}
