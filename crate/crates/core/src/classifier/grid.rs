use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::f1;
use super::pca::{pca_fit, pca_transform};
use super::svm::{
    check_training, cross_squared_distances, rbf_from_distances, sign, solve_with_distances,
    squared_distances, ClassWeight, SvmParams, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use super::{check_finite, check_labels, ClassifierError, NEGATIVE, POSITIVE};
use crate::matrix::RowMatrix;
use crate::model::Disfluency;

pub const DEFAULT_GAMMAS: [f64; 5] = [0.1, 0.01, 0.001, 0.0001, 0.00001];
pub const DEFAULT_CS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
pub const DEFAULT_MIN_VARIANCE: f64 = 0.9;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 1_234;

/// Pooled utterance features from one embedding layer; rows follow the
/// label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeatures {
    pub layer: usize,
    pub features: RowMatrix,
}

impl LayerFeatures {
    pub fn new(layer: usize, features: RowMatrix) -> Self {
        Self { layer, features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub min_variance: f64,
    pub class_weight: ClassWeight,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            gammas: DEFAULT_GAMMAS.to_vec(),
            cs: DEFAULT_CS.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            min_variance: DEFAULT_MIN_VARIANCE,
            class_weight: ClassWeight::None,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl GridConfig {
    pub fn svm_params(&self, c: f64, gamma: f64) -> SvmParams {
        SvmParams {
            c,
            gamma,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            class_weight: self.class_weight,
        }
    }

    /// Rejects an empty grid, fewer than two folds and out-of-range parameters.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.gammas.is_empty() || self.cs.is_empty() {
            return Err(ClassifierError::EmptyGrid);
        }
        if self.folds < 2 {
            return Err(ClassifierError::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        // parameter ranges are checked by the SVM itself; check them up
        // front so a bad grid fails before any fold work
        for &g in &self.gammas {
            for &c in &self.cs {
                check_training(
                    &RowMatrix::zeros(2, 1),
                    &[POSITIVE, NEGATIVE],
                    &self.svm_params(c, g),
                )?;
            }
        }
        if !(self.min_variance > 0.0 && self.min_variance <= 1.0) {
            return Err(ClassifierError::InvalidParameter(format!(
                "min_variance must be in (0, 1], got {}",
                self.min_variance
            )));
        }
        Ok(())
    }
}

/// Cross-validated score of one (layer, gamma, C) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layer: usize,
    pub gamma_index: usize,
    pub c_index: usize,
    pub gamma: f64,
    pub c: f64,
    /// Positive-class F1 on each held-out fold, in fold order.
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub disfluency: Disfluency,
    pub folds: usize,
    pub seed: u64,
    pub min_variance: f64,
    pub class_weight: ClassWeight,
    pub best_layer: usize,
    pub best_gamma: f64,
    pub best_c: f64,
    pub best_f1: f64,
    /// Ordered by (layer, gamma index, C index).
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn best_cell(&self) -> Option<&GridCell> {
        self.cells.iter().find(|c| {
            c.layer == self.best_layer && c.gamma == self.best_gamma && c.c == self.best_c
        })
    }
}

/// Assigns each sample to one of `k` folds so that every fold receives
/// `floor` or `ceil` of each class's share. Reproducible for a given seed.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<usize>, ClassifierError> {
    if k < 2 {
        return Err(ClassifierError::InvalidParameter(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let (pos, neg) = check_labels(labels)?;
    for (label, found) in [(POSITIVE, pos), (NEGATIVE, neg)] {
        if found < k {
            return Err(ClassifierError::InsufficientClassMembers {
                label,
                found,
                folds: k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    for class in [POSITIVE, NEGATIVE] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (slot, &i) in members.iter().enumerate() {
            folds[i] = slot % k;
        }
    }
    Ok(folds)
}

/// F1 for every (gamma, C) pair on one train/test split, gamma-major.
fn split_scores(
    x: &RowMatrix,
    y: &[i8],
    train: &[usize],
    test: &[usize],
    config: &GridConfig,
) -> Result<Vec<f64>, ClassifierError> {
    let x_train = x.select_rows(train);
    let x_test = x.select_rows(test);
    let y_train: Vec<i8> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<i8> = test.iter().map(|&i| y[i]).collect();

    let pca = pca_fit(&x_train, config.min_variance)?;
    let z_train = pca_transform(&pca, &x_train)?;
    let z_test = pca_transform(&pca, &x_test)?;
    let d_train = squared_distances(&z_train);
    let d_test = cross_squared_distances(&z_test, &z_train);
    let sizes = check_labels(&y_train)?;

    let mut scores = Vec::with_capacity(config.gammas.len() * config.cs.len());
    for &gamma in &config.gammas {
        let k_test = rbf_from_distances(&d_test, gamma);
        for &c in &config.cs {
            let params = config.svm_params(c, gamma);
            let solution = solve_with_distances(&y_train, &d_train, &params, sizes);
            let preds: Vec<i8> = solution
                .decision_values(&y_train, &k_test)
                .into_iter()
                .map(sign)
                .collect();
            scores.push(f1(&preds, &y_test, POSITIVE)?);
        }
    }
    Ok(scores)
}

/// Stratified k-fold search over layers, RBF widths and penalties for one
/// disfluency task.
///
/// PCA is fit on each fold's training split only. The best cell is the one
/// with the highest mean positive-class F1; ties go to the smallest
/// (layer, gamma index, C index).
pub fn grid_search(
    disfluency: Disfluency,
    layers: &[LayerFeatures],
    labels: &[i8],
    config: &GridConfig,
) -> Result<GridSearchResult, ClassifierError> {
    if layers.is_empty() {
        return Err(ClassifierError::NoLayers);
    }
    config.validate()?;
    let mut seen = BTreeSet::new();
    for lf in layers {
        if !seen.insert(lf.layer) {
            return Err(ClassifierError::InvalidParameter(format!(
                "layer {} given twice",
                lf.layer
            )));
        }
        if lf.features.rows() != labels.len() {
            return Err(ClassifierError::LayerSampleMismatch {
                layer: lf.layer,
                expected: labels.len(),
                found: lf.features.rows(),
            });
        }
        check_finite(&lf.features)?;
    }
    let mut layers: Vec<&LayerFeatures> = layers.iter().collect();
    layers.sort_by_key(|lf| lf.layer);

    let folds = stratified_folds(labels, config.folds, config.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..config.folds)
        .map(|f| (0..labels.len()).partition(|&i| folds[i] != f))
        .collect();

    let tasks: Vec<(usize, usize)> = (0..layers.len())
        .flat_map(|l| (0..config.folds).map(move |f| (l, f)))
        .collect();
    let results: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(l, f)| {
            let (train, test) = &splits[f];
            split_scores(&layers[l].features, labels, train, test, config)
        })
        .collect::<Result<_, _>>()?;

    let per_layer = config.gammas.len() * config.cs.len();
    let mut cells = Vec::with_capacity(layers.len() * per_layer);
    for (l, lf) in layers.iter().enumerate() {
        for (gi, &gamma) in config.gammas.iter().enumerate() {
            for (ci, &c) in config.cs.iter().enumerate() {
                let idx = gi * config.cs.len() + ci;
                let fold_f1: Vec<f64> = (0..config.folds)
                    .map(|f| results[l * config.folds + f][idx])
                    .collect();
                let mean_f1 = fold_f1.iter().sum::<f64>() / config.folds as f64;
                cells.push(GridCell {
                    layer: lf.layer,
                    gamma_index: gi,
                    c_index: ci,
                    gamma,
                    c,
                    fold_f1,
                    mean_f1,
                });
            }
        }
    }

    let mut best = &cells[0];
    for cell in &cells[1..] {
        if cell.mean_f1 > best.mean_f1 {
            best = cell;
        }
    }
    Ok(GridSearchResult {
        disfluency,
        folds: config.folds,
        seed: config.seed,
        min_variance: config.min_variance,
        class_weight: config.class_weight,
        best_layer: best.layer,
        best_gamma: best.gamma,
        best_c: best.c,
        best_f1: best.mean_f1,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn labels(pos: usize, neg: usize) -> Vec<i8> {
        let mut y = vec![POSITIVE; pos];
        y.extend(vec![NEGATIVE; neg]);
        y
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let y = labels(7, 23);
        let a = stratified_folds(&y, 5, 3).unwrap();
        assert_eq!(a, stratified_folds(&y, 5, 3).unwrap());
        assert_ne!(a, stratified_folds(&y, 5, 4).unwrap());
        for f in 0..5 {
            let pos = (0..30).filter(|&i| a[i] == f && y[i] == POSITIVE).count();
            let neg = (0..30).filter(|&i| a[i] == f && y[i] == NEGATIVE).count();
            assert!((1..=2).contains(&pos));
            assert!((4..=5).contains(&neg));
        }
    }

    #[test]
    fn too_few_positives() {
        assert_eq!(
            stratified_folds(&labels(4, 20), 5, 0),
            Err(ClassifierError::InsufficientClassMembers {
                label: POSITIVE,
                found: 4,
                folds: 5
            })
        );
    }

    fn dataset(seed: u64, signal_layer: usize) -> (Vec<LayerFeatures>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = labels(10, 20);
        let layers = (0..3)
            .map(|layer| {
                let rows: Vec<Vec<f64>> = y
                    .iter()
                    .map(|&label| {
                        (0..4)
                            .map(|d| {
                                let shift = if layer == signal_layer && d == 0 {
                                    3.0 * f64::from(label)
                                } else {
                                    0.0
                                };
                                shift + rng.gen_range(-1.0..1.0)
                            })
                            .collect()
                    })
                    .collect();
                LayerFeatures::new(layer, RowMatrix::from_rows(&rows).unwrap())
            })
            .collect();
        (layers, y)
    }

    fn small_config() -> GridConfig {
        GridConfig {
            gammas: vec![0.1, 0.01],
            cs: vec![1.0, 10.0],
            folds: 3,
            ..GridConfig::default()
        }
    }

    #[test]
    fn finds_signal_layer() {
        let (layers, y) = dataset(11, 1);
        let r = grid_search(Disfluency::Blocks, &layers, &y, &small_config()).unwrap();
        assert_eq!(r.best_layer, 1);
        assert_eq!(r.cells.len(), 12);
        let max = r.cells.iter().map(|c| c.mean_f1).fold(f64::MIN, f64::max);
        assert_eq!(r.best_f1, max);
        assert_eq!(r.best_cell().unwrap().mean_f1, max);
    }

    #[test]
    fn deterministic_and_ordered() {
        let (mut layers, y) = dataset(5, 2);
        let a = grid_search(Disfluency::Interjections, &layers, &y, &small_config()).unwrap();
        layers.reverse();
        let b = grid_search(Disfluency::Interjections, &layers, &y, &small_config()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let keys: Vec<_> = a.cells.iter().map(|c| (c.layer, c.gamma_index, c.c_index)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn ties_go_to_first_cell() {
        // identical layers give identical scores; the lowest coordinates win
        let (layers, y) = dataset(8, 0);
        let twin = vec![
            LayerFeatures::new(4, layers[0].features.clone()),
            LayerFeatures::new(7, layers[0].features.clone()),
        ];
        let config = GridConfig {
            gammas: vec![1e-5, 1e-5],
            cs: vec![1000.0, 1000.0],
            folds: 3,
            ..GridConfig::default()
        };
        let r = grid_search(Disfluency::Blocks, &twin, &y, &config).unwrap();
        assert!(r.cells.iter().all(|c| c.mean_f1 == r.cells[0].mean_f1));
        let best = r.best_cell().unwrap();
        assert_eq!((best.layer, best.gamma_index, best.c_index), (4, 0, 0));
    }

    #[test]
    fn input_errors() {
        let (layers, y) = dataset(1, 0);
        assert_eq!(
            grid_search(Disfluency::Blocks, &[], &y, &small_config()),
            Err(ClassifierError::NoLayers)
        );
        assert!(matches!(
            grid_search(Disfluency::Blocks, &layers, &y[1..], &small_config()),
            Err(ClassifierError::LayerSampleMismatch { .. })
        ));
        let empty = GridConfig {
            cs: vec![],
            ..small_config()
        };
        assert_eq!(
            grid_search(Disfluency::Blocks, &layers, &y, &empty),
            Err(ClassifierError::EmptyGrid)
        );
        let bad_gamma = GridConfig {
            gammas: vec![-1.0],
            ..small_config()
        };
        assert!(matches!(
            grid_search(Disfluency::Blocks, &layers, &y, &bad_gamma),
            Err(ClassifierError::InvalidParameter(_))
        ));
    }
}
