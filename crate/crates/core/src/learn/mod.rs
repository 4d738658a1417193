//! Parameter identification from annotated frame pairs and forward
//! prediction of masks.

mod config;
mod extract;
mod fit;
mod objective;
mod predict;

pub use config::{Frame, GradientMode, LossReport, TrainConfig, TrainPair, DEFAULT_LAMBDA};
pub use extract::{extract_eta, extract_state, periodic_sq_distance, signed_distance};
pub use fit::{fit, fit_with_progress, FitProgress};
pub use objective::{grad, loss, Objective, Tape};
pub use predict::{pixel_accuracy, predict_masks};
