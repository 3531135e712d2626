//! Dual-view breast ultrasound lesion classification.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`tensor`]: dense `f64` tensors, valid convolution and a finite-difference
//!   gradient checker.
//! - [`nn`]: layers, losses, SGD, network graphs with one or two input
//!   branches, and checkpoints.
//! - [`preprocess`]: ROI enhancement (median, equalization, Butterworth
//!   low-pass in the Fourier domain, morphology) and Otsu lesion masks.
//! - [`features`]: HOG, GLCM, gradient-direction histograms and CNN
//!   penultimate-layer features.
//! - [`classifiers`]: SMO-trained SVM, random forest, kNN and ROC AUC.
//! - [`fusion`]: Single-Net / 2Views-Net architectures, probability fusion
//!   and the two-CNN feature-fusion pipeline.
//! - [`synthdata`]: deterministic synthetic coronal/transverse lesion pairs.
//! - [`harness`]: experiment configs, runners and report emitters behind the
//!   `dvnet` CLI.

pub mod classifiers;
pub mod error;
pub mod features;
pub mod fusion;
pub mod harness;
pub mod image;
pub mod nn;
pub mod par;
pub mod preprocess;
pub mod rng;
pub mod synthdata;
pub mod tensor;

pub use error::{Error, Result};

/// Version string embedded in every emitted artifact.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
