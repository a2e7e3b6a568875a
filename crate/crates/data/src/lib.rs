//! Synthetic detection corpus tooling: scene generation with controllable
//! occlusion/contrast/noise, PPM and label I/O, the deterministic 9:1
//! split, a grid-counting IoU oracle, and AP/mAP/mAR reporting.

mod dataset;
mod error;
mod metrics;
mod ppm;
mod raster;
mod scene;

pub use dataset::{
    generate_dataset, label_lines, list_dataset, load_labeled, parse_labels, split_dataset,
};
pub use error::{Error, Result};
pub use metrics::{
    average_precision, evaluate, pr_curve, reports_to_csv, Detection, MetricsReport, PRCurve,
    MAR_THRESHOLDS,
};
pub use ppm::{read_ppm, write_ppm, Image};
pub use raster::rasterized_iou_oracle;
pub use scene::{class_color, generate_scene, LabeledImage, SceneSpec};
