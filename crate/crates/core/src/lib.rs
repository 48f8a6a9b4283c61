//! # rubriclab
//!
//! Tooling for rubric-based speech assessment:
//!
//! - [`model`]: the annotation rubric (phonetics with per-word SODA flags,
//!   fluency and prosody occurrence counts, qualitative levels, global
//!   observations) as validated types, plus the label-level rules.
//! - [`gop`]: Goodness-of-Pronunciation scoring (GMM-GoP, NN-GoP, DNN-GoP)
//!   from frame-level phone logits and phone alignments.
//! - [`stats`]: Kendall tau-b, correlation reports and the corpus tables.
//! - [`classifier`]: mean pooling, PCA, an SMO-trained RBF SVM, stratified
//!   grid search and cross-corpus evaluation for disfluency detection.
//! - [`io`]: every on-disk format (binary matrix containers, alignment CSV,
//!   annotation JSON/CSV, manifests, reports).
//! - [`service`]: the HTTP annotation backend.
//! - [`cli`]: the `rubriclab` command-line entry point.
//!
//! Runnable examples for each capability live in `examples/`.

pub mod classifier;
pub mod cli;
pub mod gop;
pub mod io;
pub mod matrix;
pub mod model;
pub mod service;
pub mod stats;

pub use matrix::RowMatrix;
