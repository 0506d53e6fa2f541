//! Single-frame infrared small-target detection by weighted low-rank
//! patch-tensor decomposition.
//!
//! A grayscale frame is cut into overlapping patches that are stacked into a
//! third-order tensor. The tensor is split into a low-rank background and a
//! sparse non-negative target component by an augmented-Lagrangian scheme
//! whose sparsity term is reweighted both by a local-structure (edge) map and
//! by the evolving target magnitudes. The separated components are folded
//! back into images, the target image is thresholded, and connected
//! components become detections.
//!
//! Pipeline stages (one module each):
//!
//! 1. [`structure`] -- structure-tensor edge feature and the local-structure
//!    weight map.
//! 2. [`patch`] -- sliding-window patch layout, image <-> tensor transforms.
//! 3. [`tensor`] -- unfold/fold, shrinkage and singular-value thresholding.
//! 4. [`solver`] -- the alternating-direction decomposition loop.
//! 5. [`pipeline`] -- whole-frame detection, segmentation, batch runs and
//!    artifact output.
//! 6. [`eval`] / [`scene`] -- detection metrics, ROC sweeps and the synthetic
//!    scene generator used for tests and demos.
//!
//! Each major capability has a runnable demo under `examples/`; start with
//! `cargo run --release --example detect_frame`.

pub mod config;
pub mod error;
pub mod eval;
pub mod image_io;
pub mod patch;
pub mod pipeline;
pub mod scene;
pub mod solver;
pub mod structure;
pub mod tensor;
mod util;

pub use error::{Error, Result};
pub use eval::{match_detections, metrics, roc, scr, MetricsReport, RocPoint, TargetBox};
pub use image_io::Image;
pub use patch::{image_to_tensor, tensor_to_image, PatchLayout};
pub use pipeline::{detect, segment, Detection, DetectionConfig, DetectionResult};
pub use scene::{gen_scene, SceneSpec};
pub use solver::{solve, SolverConfig, SolverMode, SolverResult, StopReason};
pub use structure::{edge_feature, local_structure_weight, structure_field};
pub use tensor::{fold, soft_shrink, svt, tensor_svt, unfold, Mat, Tensor3};
