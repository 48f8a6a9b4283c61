use serde::{Deserialize, Serialize};

use super::grid::{GridConfig, GridSearchResult, LayerFeatures};
use super::metrics::f1;
use super::pca::{pca_fit, pca_transform, PcaModel};
use super::svm::{svm_train, SvmModel};
use super::{check_labels, ClassifierError, NEGATIVE, POSITIVE};
use crate::matrix::RowMatrix;
use crate::model::Disfluency;

/// PCA plus SVM fit on every sample at the selected layer and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisfluencyDetector {
    pub disfluency: Disfluency,
    pub layer: usize,
    pub gamma: f64,
    pub c: f64,
    /// Mean cross-validated F1 of the selected cell.
    pub cv_f1: f64,
    pub pca: PcaModel,
    pub svm: SvmModel,
}

impl DisfluencyDetector {
    pub fn decision_values(&self, features: &RowMatrix) -> Result<Vec<f64>, ClassifierError> {
        let z = pca_transform(&self.pca, features)?;
        self.svm.decision_values(&z)
    }

    pub fn predict(&self, features: &RowMatrix) -> Result<Vec<i8>, ClassifierError> {
        let z = pca_transform(&self.pca, features)?;
        self.svm.predict_rows(&z)
    }

    /// Scores predictions on `features` against `labels` for both classes.
    pub fn evaluate(&self, features: &RowMatrix, labels: &[i8]) -> Result<DisfluencyEval, ClassifierError> {
        if features.rows() != labels.len() {
            return Err(ClassifierError::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        let (support_id, support_nid) = check_labels(labels)?;
        let preds = self.predict(features)?;
        Ok(DisfluencyEval {
            disfluency: self.disfluency,
            layer: self.layer,
            cv_f1: self.cv_f1,
            f1_id: f1(&preds, labels, POSITIVE)?,
            f1_nid: f1(&preds, labels, NEGATIVE)?,
            support_id,
            support_nid,
        })
    }
}

/// Refits PCA and the SVM on all samples of the layer chosen by `grid`.
pub fn train_final(
    grid: &GridSearchResult,
    layers: &[LayerFeatures],
    labels: &[i8],
    config: &GridConfig,
) -> Result<DisfluencyDetector, ClassifierError> {
    let best = grid.best_cell().ok_or(ClassifierError::EmptyGrid)?;
    let features = &layers
        .iter()
        .find(|lf| lf.layer == best.layer)
        .ok_or(ClassifierError::MissingLayer(best.layer))?
        .features;
    if features.rows() != labels.len() {
        return Err(ClassifierError::LayerSampleMismatch {
            layer: best.layer,
            expected: labels.len(),
            found: features.rows(),
        });
    }
    let pca = pca_fit(features, grid.min_variance)?;
    let z = pca_transform(&pca, features)?;
    let params = GridConfig {
        class_weight: grid.class_weight,
        ..config.clone()
    }
    .svm_params(best.c, best.gamma);
    let svm = svm_train(&z, labels, &params)?;
    Ok(DisfluencyDetector {
        disfluency: grid.disfluency,
        layer: best.layer,
        gamma: best.gamma,
        c: best.c,
        cv_f1: best.mean_f1,
        pca,
        svm,
    })
}

/// F1 for detection (`f1_id`, disfluency as positive class) and for
/// non-detection (`f1_nid`, absence as positive class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisfluencyEval {
    pub disfluency: Disfluency,
    pub layer: usize,
    pub cv_f1: f64,
    pub f1_id: f64,
    pub f1_nid: f64,
    pub support_id: usize,
    pub support_nid: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<DisfluencyEval>,
}

/// Applies each source-corpus detector to the target corpus features at the
/// detector's layer. `target` pairs each detector's disfluency with its
/// binary labels; rows come out in detector order.
pub fn cross_corpus_eval(
    detectors: &[DisfluencyDetector],
    target_layers: &[LayerFeatures],
    target: &[(Disfluency, Vec<i8>)],
) -> Result<EvalReport, ClassifierError> {
    let mut rows = Vec::with_capacity(detectors.len());
    for det in detectors {
        let features = &target_layers
            .iter()
            .find(|lf| lf.layer == det.layer)
            .ok_or(ClassifierError::MissingLayer(det.layer))?
            .features;
        let labels = target
            .iter()
            .find(|(d, _)| *d == det.disfluency)
            .map(|(_, y)| y)
            .ok_or_else(|| {
                ClassifierError::InvalidParameter(format!(
                    "no target labels for {}",
                    det.disfluency.as_str()
                ))
            })?;
        rows.push(det.evaluate(features, labels)?);
    }
    Ok(EvalReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::grid::grid_search;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable(seed: u64) -> (Vec<LayerFeatures>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<i8> = (0..24).map(|i| if i % 3 == 0 { POSITIVE } else { NEGATIVE }).collect();
        let layers = (0..2)
            .map(|layer| {
                let rows: Vec<Vec<f64>> = y
                    .iter()
                    .map(|&l| {
                        (0..3)
                            .map(|d| {
                                let s = if layer == 1 && d < 2 { 4.0 * f64::from(l) } else { 0.0 };
                                s + rng.gen_range(-1.0..1.0)
                            })
                            .collect()
                    })
                    .collect();
                LayerFeatures::new(layer, RowMatrix::from_rows(&rows).unwrap())
            })
            .collect();
        (layers, y)
    }

    fn config() -> GridConfig {
        GridConfig {
            gammas: vec![0.1, 0.01],
            cs: vec![1.0, 100.0],
            folds: 4,
            ..GridConfig::default()
        }
    }

    #[test]
    fn final_fit_is_at_least_cv_score() {
        let (layers, y) = separable(2);
        let grid = grid_search(Disfluency::Blocks, &layers, &y, &config()).unwrap();
        let det = train_final(&grid, &layers, &y, &config()).unwrap();
        assert_eq!(det.layer, 1);
        let eval = det.evaluate(&layers[1].features, &y).unwrap();
        assert!(eval.f1_id >= det.cv_f1);
        assert_eq!((eval.support_id, eval.support_nid), (8, 16));

        let again = train_final(&grid, &layers, &y, &config()).unwrap();
        assert_eq!(det.svm.support_indices, again.svm.support_indices);
    }

    #[test]
    fn identity_transfer() {
        let (layers, y) = separable(3);
        let grid = grid_search(Disfluency::WordRepetitions, &layers, &y, &config()).unwrap();
        let det = train_final(&grid, &layers, &y, &config()).unwrap();
        let report =
            cross_corpus_eval(&[det.clone()], &layers, &[(Disfluency::WordRepetitions, y.clone())])
                .unwrap();
        assert_eq!(report.rows.len(), 1);
        let direct = det.evaluate(&layers[det.layer].features, &y).unwrap();
        assert_eq!(report.rows[0], direct);
        assert!((0.0..=1.0).contains(&direct.f1_nid));
    }

    #[test]
    fn errors() {
        let (layers, y) = separable(4);
        let mut grid = grid_search(Disfluency::Blocks, &layers, &y, &config()).unwrap();
        let det = train_final(&grid, &layers, &y, &config()).unwrap();
        assert_eq!(
            cross_corpus_eval(&[det.clone()], &layers[..0], &[(Disfluency::Blocks, y.clone())]),
            Err(ClassifierError::MissingLayer(det.layer))
        );
        let narrow = LayerFeatures::new(det.layer, RowMatrix::zeros(24, 2));
        assert!(matches!(
            cross_corpus_eval(&[det], &[narrow], &[(Disfluency::Blocks, y.clone())]),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        grid.cells.clear();
        assert_eq!(
            train_final(&grid, &layers, &y, &config()),
            Err(ClassifierError::EmptyGrid)
        );
    }
}
