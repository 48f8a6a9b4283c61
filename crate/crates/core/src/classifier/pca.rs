use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_finite, ClassifierError};
use crate::matrix::RowMatrix;

/// Principal axes of a training set, truncated to the smallest number of
/// components whose cumulative explained-variance ratio reaches
/// `min_variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k x D, orthonormal rows, in decreasing variance order.
    pub components: RowMatrix,
    /// Variance along each kept component (covariance eigenvalue).
    pub eigenvalues: Vec<f64>,
    /// `eigenvalues / total_variance`.
    pub explained: Vec<f64>,
    pub total_variance: f64,
    pub min_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cumulative_explained(&self) -> f64 {
        self.explained.iter().sum()
    }
}

fn centered(x: &RowMatrix, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - mean[j])
}

/// Eigenpairs of the sample covariance, sorted by decreasing eigenvalue.
/// Uses the n x n Gram matrix instead when there are fewer samples than
/// dimensions.
fn covariance_eigen(xc: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = xc.shape();
    let denom = (n - 1) as f64;
    let mut pairs: Vec<(f64, Vec<f64>)> = if d <= n {
        let cov = (xc.transpose() * xc) / denom;
        let eig = SymmetricEigen::new(cov);
        (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect()
    } else {
        let gram = (xc * xc.transpose()) / denom;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .filter(|&i| eig.eigenvalues[i] > 0.0)
            .map(|i| {
                let lambda = eig.eigenvalues[i];
                let v = xc.transpose() * eig.eigenvectors.column(i);
                let norm = v.norm();
                (lambda, v.iter().map(|x| x / norm).collect())
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
        .into_iter()
        .map(|(lambda, mut v)| {
            // largest-magnitude entry positive, for reproducible signs
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (lambda.max(0.0), v)
        })
        .unzip()
}

pub fn pca_fit(x: &RowMatrix, min_variance: f64) -> Result<PcaModel, ClassifierError> {
    if !(min_variance > 0.0 && min_variance <= 1.0) {
        return Err(ClassifierError::InvalidParameter(format!(
            "min_variance must be in (0, 1], got {min_variance}"
        )));
    }
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(ClassifierError::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    check_finite(x)?;

    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let xc = centered(x, &mean);
    let total_variance: f64 = xc.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    if total_variance <= f64::EPSILON * mean.iter().map(|m| m * m).sum::<f64>().max(1.0) {
        return Err(ClassifierError::DegenerateData);
    }

    let (values, vectors) = covariance_eigen(&xc);
    let mut kept = 0;
    let mut cumulative = 0.0;
    for &lambda in &values {
        if lambda <= total_variance * 1e-12 {
            break;
        }
        kept += 1;
        cumulative += lambda / total_variance;
        if cumulative >= min_variance {
            break;
        }
    }
    let kept = kept.max(1);

    let eigenvalues = values[..kept].to_vec();
    let explained = eigenvalues.iter().map(|l| l / total_variance).collect();
    let components = RowMatrix::from_rows(&vectors[..kept]).expect("equal-length eigenvectors");
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        explained,
        total_variance,
        min_variance,
    })
}

/// Projects `(x - mean)` onto the kept components: n x D in, n x k out.
pub fn pca_transform(model: &PcaModel, x: &RowMatrix) -> Result<RowMatrix, ClassifierError> {
    if x.cols() != model.dim() {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.dim(),
            found: x.cols(),
        });
    }
    let k = model.k();
    let mut out = RowMatrix::zeros(x.rows(), k);
    let mut buf = vec![0.0; model.dim()];
    for i in 0..x.rows() {
        for ((b, v), m) in buf.iter_mut().zip(x.row(i)).zip(&model.mean) {
            *b = v - m;
        }
        for (c, slot) in out.row_mut(i).iter_mut().enumerate() {
            *slot = model
                .components
                .row(c)
                .iter()
                .zip(&buf)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    Ok(out)
}
