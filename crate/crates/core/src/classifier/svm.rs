use serde::{Deserialize, Serialize};

use super::{check_finite, check_labels, ClassifierError, NEGATIVE, POSITIVE};
use crate::matrix::RowMatrix;

/// KKT violation tolerance at which the solver stops.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;

// Stand-in for a non-positive curvature along the working pair.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    /// One penalty `C` for both classes.
    #[default]
    None,
    /// Per-class penalty `C * n / (2 * n_class)`.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub class_weight: ClassWeight,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            class_weight: ClassWeight::None,
        }
    }

    pub fn with_class_weight(mut self, weight: ClassWeight) -> Self {
        self.class_weight = weight;
        self
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ClassifierError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("C", self.c)?;
        positive("gamma", self.gamma)?;
        positive("tolerance", self.tolerance)?;
        if self.max_iterations == 0 {
            return Err(ClassifierError::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Effective box bounds `(C_+, C_-)` for the given class sizes.
    pub fn bounds(&self, positives: usize, negatives: usize) -> (f64, f64) {
        match self.class_weight {
            ClassWeight::None => (self.c, self.c),
            ClassWeight::Balanced => {
                let n = (positives + negatives) as f64;
                (
                    self.c * n / (2.0 * positives as f64),
                    self.c * n / (2.0 * negatives as f64),
                )
            }
        }
    }
}

/// A trained RBF-kernel SVM.
///
/// `decision(x) = sum_i dual_coefs[i] * exp(-gamma * |sv_i - x|^2) + bias`,
/// where `dual_coefs[i] = alpha_i * y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: RowMatrix,
    pub dual_coefs: Vec<f64>,
    /// Training-set row of each support vector.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub c_positive: f64,
    pub c_negative: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        if x.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let sum: f64 = self
            .support_vectors
            .iter_rows()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * (-self.gamma * squared_distance(sv, x)).exp())
            .sum();
        Ok(sum + self.bias)
    }

    pub fn decision_values(&self, x: &RowMatrix) -> Result<Vec<f64>, ClassifierError> {
        x.iter_rows().map(|row| self.decision_value(row)).collect()
    }

    pub fn predict_rows(&self, x: &RowMatrix) -> Result<Vec<i8>, ClassifierError> {
        Ok(self.decision_values(x)?.into_iter().map(sign).collect())
    }
}

/// Decision value to label; zero goes to the positive class.
pub(crate) fn sign(value: f64) -> i8 {
    if value >= 0.0 {
        POSITIVE
    } else {
        NEGATIVE
    }
}

pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<i8, ClassifierError> {
    model.decision_value(x).map(sign)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Row-major n x n matrix of pairwise squared Euclidean distances.
pub fn squared_distances(x: &RowMatrix) -> Vec<f64> {
    let n = x.rows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(x.row(i), x.row(j));
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Row-major `a.rows() x b.rows()` squared distances between two sets.
pub(crate) fn cross_squared_distances(a: &RowMatrix, b: &RowMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.rows() * b.rows());
    for ra in a.iter_rows() {
        out.extend(b.iter_rows().map(|rb| squared_distance(ra, rb)));
    }
    out
}

pub(crate) fn rbf_from_distances(d2: &[f64], gamma: f64) -> Vec<f64> {
    d2.iter().map(|d| (-gamma * d).exp()).collect()
}

/// Dual solution over the training set.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Solution {
    /// Decision values for rows whose kernel against the training set is
    /// given row-major in `cross`.
    pub fn decision_values(&self, y: &[i8], cross: &[f64]) -> Vec<f64> {
        let n = self.alpha.len();
        cross
            .chunks_exact(n)
            .map(|k| {
                let sum: f64 = self
                    .alpha
                    .iter()
                    .zip(y)
                    .zip(k)
                    .filter(|((a, _), _)| **a > 0.0)
                    .map(|((a, yi), kv)| a * f64::from(*yi) * kv)
                    .sum();
                sum + self.bias
            })
            .collect()
    }
}

/// Sequential minimal optimization for
/// `min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a_i <= C_{y_i}`
/// with `Q_ij = y_i y_j K_ij`, using second-order working-set selection.
pub(crate) fn solve(
    kernel: &[f64],
    y: &[i8],
    c_pos: f64,
    c_neg: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Solution {
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let bound = |i: usize| if y[i] == POSITIVE { c_pos } else { c_neg };
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: &[f64], i: usize| a[i] >= bound(i);
    let at_lower = |a: &[f64], i: usize| a[i] <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        // first index: maximal violation from the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] == POSITIVE {
                !at_upper(&alpha, t)
            } else {
                !at_lower(&alpha, t)
            };
            if up {
                let v = -yf[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // second index: largest objective decrease from the "low" set
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_decrease = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] == POSITIVE {
                !at_lower(&alpha, t)
            } else {
                !at_upper(&alpha, t)
            };
            if !low {
                continue;
            }
            let v = yf[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            if let Some(i) = i_sel {
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    let decrease = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if decrease <= best_decrease {
                        best_decrease = decrease;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= tolerance => (i, j),
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (ci, cj) = (bound(i), bound(j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = {
            let q = k(i, i) + k(j, j) - 2.0 * k(i, j);
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += yf[t] * (yf[i] * k(i, t) * di + yf[j] * k(j, t) * dj);
        }
    }

    // bias from free vectors, or the middle of the feasible interval
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut free_sum = 0.0;
    for t in 0..n {
        let yg = yf[t] * grad[t];
        if at_upper(&alpha, t) {
            if y[t] == NEGATIVE {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if at_lower(&alpha, t) {
            if y[t] == POSITIVE {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    };

    Solution {
        alpha,
        bias: -rho,
        iterations,
        converged,
    }
}

/// Checks shapes, labels and parameters shared by every training entry
/// point. Returns the class sizes.
pub(crate) fn check_training(
    x: &RowMatrix,
    y: &[i8],
    params: &SvmParams,
) -> Result<(usize, usize), ClassifierError> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(ClassifierError::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(ClassifierError::TooFewSamples {
            required: 2,
            found: y.len(),
        });
    }
    check_finite(x)?;
    let (pos, neg) = check_labels(y)?;
    if pos == 0 || neg == 0 {
        return Err(ClassifierError::SingleClass);
    }
    Ok((pos, neg))
}

pub(crate) fn solve_with_distances(
    y: &[i8],
    distances: &[f64],
    params: &SvmParams,
    class_sizes: (usize, usize),
) -> Solution {
    let kernel = rbf_from_distances(distances, params.gamma);
    let (c_pos, c_neg) = params.bounds(class_sizes.0, class_sizes.1);
    solve(&kernel, y, c_pos, c_neg, params.tolerance, params.max_iterations)
}

pub(crate) fn model_from_solution(
    x: &RowMatrix,
    y: &[i8],
    solution: Solution,
    params: &SvmParams,
    class_sizes: (usize, usize),
) -> SvmModel {
    let support_indices: Vec<usize> = (0..y.len()).filter(|&i| solution.alpha[i] > 0.0).collect();
    let dual_coefs = support_indices
        .iter()
        .map(|&i| solution.alpha[i] * f64::from(y[i]))
        .collect();
    let (c_positive, c_negative) = params.bounds(class_sizes.0, class_sizes.1);
    SvmModel {
        support_vectors: x.select_rows(&support_indices),
        dual_coefs,
        support_indices,
        bias: solution.bias,
        gamma: params.gamma,
        c: params.c,
        c_positive,
        c_negative,
        iterations: solution.iterations,
        converged: solution.converged,
    }
}

/// Trains a soft-margin RBF SVM on rows of `x` with labels in {+1, -1}.
pub fn svm_train(x: &RowMatrix, y: &[i8], params: &SvmParams) -> Result<SvmModel, ClassifierError> {
    let sizes = check_training(x, y, params)?;
    let solution = solve_with_distances(y, &squared_distances(x), params, sizes);
    Ok(model_from_solution(x, y, solution, params, sizes))
}
