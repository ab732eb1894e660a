//! Block-DCT Laplacian scale features for telling real, GAN-generated and
//! diffusion-generated images apart.
//!
//! The pipeline: [`spectral`] splits a grayscale image into 8x8 blocks and
//! transforms them; [`features`] summarizes every zig-zag AC position by its
//! Laplacian scale; [`classifiers`] learns from those 63 numbers (or a
//! [`subsets`] selection of them); [`lime`] explains an MLP's decisions and
//! derives new subsets; [`jpeg_attack`] measures how much of the signal
//! survives JPEG quantization; [`harness`] runs the whole grid and writes
//! reports.

pub mod classifiers;
pub mod datasets;
pub mod error;
pub mod features;
pub mod harness;
pub mod image;
pub mod jpeg_attack;
pub mod lime;
pub mod rng;
pub mod spectral;
pub mod subsets;

pub use classifiers::{evaluate, predict, train, Algorithm, EvalMetrics, Hyperparams, Prediction, TrainedModel};
pub use datasets::{ClassLabel, DatasetManifest, FeatureRow, FeatureTable, Split};
pub use error::{Error, Result};
pub use features::{extract_beta_vector, BetaVector, DcStats};
pub use image::GrayImage;
pub use lime::ContributionVector;
pub use subsets::SubsetSpec;
