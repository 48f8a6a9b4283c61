//! Disfluency detection from utterance-level speech embeddings.
//!
//! The pipeline mean-pools frame embeddings per utterance and layer, reduces
//! them with PCA to the smallest number of components that explains a target
//! share of variance, and trains an RBF-kernel SVM per disfluency type as a
//! one-vs-rest binary task. [`grid_search`] picks the layer, kernel width
//! and penalty by stratified cross-validated F1 on the positive class;
//! [`train_final`] refits on all samples and [`cross_corpus_eval`] applies
//! the result to another corpus, reporting F1 for both classes.

mod grid;
mod metrics;
mod pca;
mod pipeline;
mod svm;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matrix::RowMatrix;
use crate::model::OccurrenceCount;

pub use grid::{
    grid_search, stratified_folds, GridCell, GridConfig, GridSearchResult, LayerFeatures,
    DEFAULT_CS, DEFAULT_FOLDS, DEFAULT_GAMMAS, DEFAULT_MIN_VARIANCE, DEFAULT_SEED,
};
pub use metrics::f1;
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use pipeline::{cross_corpus_eval, train_final, DisfluencyDetector, DisfluencyEval, EvalReport};
pub use svm::{
    squared_distances, svm_predict, svm_train, ClassWeight, SvmModel, SvmParams,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};

/// Binary class labels.
pub const POSITIVE: i8 = 1;
pub const NEGATIVE: i8 = -1;

/// Utterance ids and one-vs-rest labels: positive when the disfluency
/// occurs at least once.
pub fn binary_labels(counts: &BTreeMap<String, OccurrenceCount>) -> (Vec<String>, Vec<i8>) {
    counts
        .iter()
        .map(|(id, &c)| {
            let label = if c == OccurrenceCount::None { NEGATIVE } else { POSITIVE };
            (id.clone(), label)
        })
        .unzip()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate data: zero total variance")]
    DegenerateData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("labels must be +1 or -1, got {0}")]
    InvalidLabel(i8),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("stratified {folds}-fold split needs at least {folds} samples of class {label:+}, found {found}")]
    InsufficientClassMembers { label: i8, found: usize, folds: usize },
    #[error("grid search result has no cells")]
    EmptyGrid,
    #[error("embedding set has no frames")]
    EmptyEmbedding,
    #[error("no layers given")]
    NoLayers,
    #[error("layer {layer} has {found} samples, expected {expected}")]
    LayerSampleMismatch { layer: usize, expected: usize, found: usize },
    #[error("layer {0} not available")]
    MissingLayer(usize),
}

pub(crate) fn check_finite(x: &RowMatrix) -> Result<(), ClassifierError> {
    match x.first_non_finite() {
        Some((row, col)) => Err(ClassifierError::NonFinite { row, col }),
        None => Ok(()),
    }
}

pub(crate) fn check_labels(y: &[i8]) -> Result<(usize, usize), ClassifierError> {
    let mut pos = 0;
    let mut neg = 0;
    for &label in y {
        match label {
            POSITIVE => pos += 1,
            NEGATIVE => neg += 1,
            other => return Err(ClassifierError::InvalidLabel(other)),
        }
    }
    Ok((pos, neg))
}

/// Frame-level embeddings of one utterance from one model layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmbeddingSet {
    pub utterance_id: String,
    pub layer_index: usize,
    pub frames: RowMatrix,
    pub frame_shift_ms: f64,
}

impl FrameEmbeddingSet {
    pub fn new(
        utterance_id: impl Into<String>,
        layer_index: usize,
        frames: RowMatrix,
        frame_shift_ms: f64,
    ) -> Result<Self, ClassifierError> {
        if frames.rows() == 0 {
            return Err(ClassifierError::EmptyEmbedding);
        }
        check_finite(&frames)?;
        Ok(Self {
            utterance_id: utterance_id.into(),
            layer_index,
            frames,
            frame_shift_ms,
        })
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn pooled(&self) -> Result<Vec<f64>, ClassifierError> {
        mean_pool(&self.frames)
    }
}

/// Column-wise mean over frames.
pub fn mean_pool(frames: &RowMatrix) -> Result<Vec<f64>, ClassifierError> {
    if frames.rows() == 0 {
        return Err(ClassifierError::EmptyEmbedding);
    }
    let mut sum = vec![0.0; frames.cols()];
    for row in frames.iter_rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = frames.rows() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Pools every set and groups the pooled vectors by layer. Each layer's rows
/// follow ascending utterance id; every layer must cover the same utterances
/// with a constant dimension.
pub fn pool_by_layer(
    sets: &[FrameEmbeddingSet],
) -> Result<BTreeMap<usize, (Vec<String>, RowMatrix)>, ClassifierError> {
    let mut grouped: BTreeMap<usize, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for set in sets {
        grouped
            .entry(set.layer_index)
            .or_default()
            .insert(&set.utterance_id, set.pooled()?);
    }
    let mut out = BTreeMap::new();
    let mut expected: Option<Vec<String>> = None;
    for (layer, rows) in grouped {
        let ids: Vec<String> = rows.keys().map(|s| s.to_string()).collect();
        if let Some(prev) = &expected {
            if *prev != ids {
                return Err(ClassifierError::LayerSampleMismatch {
                    layer,
                    expected: prev.len(),
                    found: ids.len(),
                });
            }
        }
        let vectors: Vec<Vec<f64>> = rows.into_values().collect();
        let matrix = RowMatrix::from_rows(&vectors).map_err(|e| match e {
            crate::matrix::ShapeError::RaggedRow { expected, found, .. } => {
                ClassifierError::DimensionMismatch { expected, found }
            }
            other => ClassifierError::InvalidParameter(other.to_string()),
        })?;
        expected = Some(ids.clone());
        out.insert(layer, (ids, matrix));
    }
    Ok(out)
}
