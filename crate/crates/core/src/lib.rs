//! Predicting a video game's G-Score class from its trailer and its summary.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: game records, G-Score math, genre grouping, manifest ingestion.
//! - [`trailer`]: burst frame selection, the VGDF feature-file format and a
//!   deterministic synthetic feature source.
//! - [`text`]: summary cleaning, tokenisation, vocabularies and fixed-length encoding.
//! - [`tensor`]: a small reverse-mode autodiff engine with the layers the models need,
//!   cross-entropy, Adam, gradient checking and the VGDM checkpoint format.
//! - [`models`]: the three fusion architectures and their trailer-only ablations.
//! - [`train`]: k-fold cross-validation, the training loop, evaluation and ablation reports.
//! - [`config`]: the key/value run configuration file.
//! - [`synthetic`]: constructed datasets with planted video and text signals.

pub mod config;
pub mod dataset;
pub mod models;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod trailer;
pub mod train;

pub use dataset::{Dataset, GScore, GameRecord};
pub use models::{BuiltModel, Modality, ModelConfig, Variant};
pub use trailer::{FrameFeatureMatrix, FrameSelectionParams};
