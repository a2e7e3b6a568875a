//! Command-line toolkit over the detection stack: dataset generation,
//! self-supervised pretraining, detector training, evaluation, a
//! finite-difference gradient audit, the variant ablation table, and
//! prediction rendering. The building blocks live here so tests can call
//! them without spawning the binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod render;
pub mod table;

pub use error::{CliError, CliResult};
