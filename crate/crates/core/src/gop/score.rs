use std::ops::Range;

use super::softmax::{log_sum_exp, sorted_log_sum_exp};
use super::{GopError, PhoneInterval, PhonePrior, PosteriorMatrix};

// Frame positions within this distance of an integer are treated as exact,
// so 0.04 s at a 20 ms shift is frame 2 and not 2.0000000000000004.
const FRAME_SNAP: f64 = 1e-9;

pub(super) fn frame_position(seconds: f64, shift_ms: f64) -> f64 {
    let pos = seconds * 1000.0 / shift_ms;
    let nearest = pos.round();
    if (pos - nearest).abs() < FRAME_SNAP {
        nearest
    } else {
        pos
    }
}

/// Rows of `matrix` covered by `interval`: `[floor(start), ceil(end))` in
/// frame units, clamped to the matrix.
///
/// An interval may overrun the logits by at most one frame.
pub fn frames_of(interval: &PhoneInterval, matrix: &PosteriorMatrix) -> Result<Range<usize>, GopError> {
    let shift = matrix.frame_shift_ms();
    let span = matrix.span_seconds();
    if interval.end > span + shift / 1000.0 + FRAME_SNAP {
        return Err(GopError::OutsideMatrix {
            phone: interval.phone.clone(),
            end: interval.end,
            span,
        });
    }
    let first = frame_position(interval.start, shift).floor().max(0.0) as usize;
    let last = (frame_position(interval.end, shift).ceil().max(0.0) as usize).min(matrix.frames());
    if first >= last {
        return Err(GopError::ZeroFramePhone {
            phone: interval.phone.clone(),
            start: interval.start,
            end: interval.end,
        });
    }
    Ok(first..last)
}

fn target_column(matrix: &PosteriorMatrix, interval: &PhoneInterval) -> Result<usize, GopError> {
    matrix
        .phone_set()
        .index_of(&interval.phone)
        .ok_or_else(|| GopError::UnknownPhone(interval.phone.clone()))
}

/// Mean over the phone's frames of `log softmax(logits)[phone]`. Always <= 0.
pub fn gmm_gop(matrix: &PosteriorMatrix, interval: &PhoneInterval) -> Result<f64, GopError> {
    let col = target_column(matrix, interval)?;
    let frames = frames_of(interval, matrix)?;
    let n = frames.len();
    let mut terms: Vec<f64> = frames
        .map(|f| {
            let row = matrix.logits().row(f);
            row[col] - log_sum_exp(row)
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mean = terms.iter().sum::<f64>() / n as f64;
    Ok(mean.min(0.0))
}

/// Log of the frame-averaged phone posterior for every phone of the set.
pub fn mean_log_posterior(
    matrix: &PosteriorMatrix,
    interval: &PhoneInterval,
) -> Result<Vec<f64>, GopError> {
    let frames = frames_of(interval, matrix)?;
    let n = frames.len();
    let logits = matrix.logits();
    let normalizers: Vec<f64> = frames.clone().map(|f| log_sum_exp(logits.row(f))).collect();
    let mut column = Vec::with_capacity(n);
    let out = (0..logits.cols())
        .map(|q| {
            column.clear();
            column.extend(
                frames
                    .clone()
                    .zip(&normalizers)
                    .map(|(f, lse)| logits.get(f, q) - lse),
            );
            sorted_log_sum_exp(&mut column) - (n as f64).ln()
        })
        .collect();
    Ok(out)
}

/// Frame-averaged softmax posterior over the phone set.
pub fn mean_posterior(matrix: &PosteriorMatrix, interval: &PhoneInterval) -> Result<Vec<f64>, GopError> {
    Ok(mean_log_posterior(matrix, interval)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Log mean posterior of the canonical phone minus the largest log mean
/// posterior. Always <= 0, and exactly 0 when the canonical phone is an
/// argmax.
pub fn nn_gop(matrix: &PosteriorMatrix, interval: &PhoneInterval) -> Result<f64, GopError> {
    let col = target_column(matrix, interval)?;
    let lmp = mean_log_posterior(matrix, interval)?;
    let max = lmp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(lmp[col] - max)
}

/// Mean posterior of the canonical phone divided by its prior (no log).
pub fn dnn_gop(
    matrix: &PosteriorMatrix,
    interval: &PhoneInterval,
    priors: &PhonePrior,
) -> Result<f64, GopError> {
    if priors.phone_set() != matrix.phone_set() {
        return Err(GopError::PriorPhoneSetMismatch);
    }
    let col = target_column(matrix, interval)?;
    let lmp = mean_log_posterior(matrix, interval)?;
    Ok(lmp[col].exp() / priors.probabilities()[col])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RowMatrix;
    use crate::model::PhoneSet;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn matrix(rows: &[[f64; 2]]) -> PosteriorMatrix {
        let phones = Arc::new(PhoneSet::new(["a", "b"]).unwrap());
        PosteriorMatrix::new("u", phones, 20.0, RowMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn iv(phone: &str, start: f64, end: f64) -> PhoneInterval {
        PhoneInterval::new(phone, start, end).unwrap()
    }

    /// Logits whose softmax equals the given probabilities.
    fn from_probs(p: [f64; 2]) -> [f64; 2] {
        [p[0].ln(), p[1].ln()]
    }

    #[test]
    fn frame_mapping() {
        let m = matrix(&[[0.0, 0.0]; 5]);
        assert_eq!(frames_of(&iv("a", 0.0, 0.04), &m).unwrap(), 0..2);
        assert_eq!(frames_of(&iv("a", 0.01, 0.05), &m).unwrap(), 0..3);
        // shorter than one shift still gets a frame
        assert_eq!(frames_of(&iv("a", 0.041, 0.042), &m).unwrap(), 2..3);
        // overrun by less than a frame is clamped
        assert_eq!(frames_of(&iv("a", 0.08, 0.11), &m).unwrap(), 4..5);
    }

    #[test]
    fn frame_mapping_errors() {
        let m = matrix(&[[0.0, 0.0]; 5]);
        assert!(matches!(
            frames_of(&iv("a", 0.10, 0.12), &m),
            Err(GopError::ZeroFramePhone { .. })
        ));
        assert!(matches!(
            frames_of(&iv("a", 0.2, 0.3), &m),
            Err(GopError::OutsideMatrix { .. })
        ));
    }

    #[test]
    fn gmm_examples() {
        let m = matrix(&[[0.0, 0.0]]);
        assert_abs_diff_eq!(gmm_gop(&m, &iv("a", 0.0, 0.02)).unwrap(), -0.693147, epsilon = 1e-6);
        let m = matrix(&[[2.0, 0.0], [0.0, 0.0]]);
        assert_abs_diff_eq!(gmm_gop(&m, &iv("a", 0.0, 0.04)).unwrap(), -0.410038, epsilon = 1e-6);
        let m = matrix(&[[20.0, 0.0], [25.0, 5.0]]);
        assert_abs_diff_eq!(gmm_gop(&m, &iv("a", 0.0, 0.04)).unwrap(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn unknown_phone() {
        let m = matrix(&[[0.0, 0.0]]);
        assert_eq!(
            gmm_gop(&m, &iv("z", 0.0, 0.02)),
            Err(GopError::UnknownPhone("z".into()))
        );
    }

    #[test]
    fn mean_posterior_examples() {
        let m = matrix(&[[0.0, 0.0], [3.0, 3.0]]);
        let p = mean_posterior(&m, &iv("a", 0.0, 0.04)).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);

        let m = matrix(&[from_probs([0.9, 0.1]), from_probs([0.1, 0.9])]);
        let p = mean_posterior(&m, &iv("a", 0.0, 0.04)).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);

        let m = matrix(&[[1.5, -0.5]]);
        let p = mean_posterior(&m, &iv("b", 0.0, 0.02)).unwrap();
        let direct = crate::gop::softmax_row(&[1.5, -0.5]);
        assert_abs_diff_eq!(p[0], direct[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], direct[1], epsilon = 1e-12);
    }

    #[test]
    fn nn_examples() {
        let m = matrix(&[[2.0, 0.0]]);
        assert_eq!(nn_gop(&m, &iv("a", 0.0, 0.02)).unwrap(), 0.0);
        // uniform posterior: tie with the max
        let m = matrix(&[[0.7, 0.7]]);
        assert_eq!(nn_gop(&m, &iv("b", 0.0, 0.02)).unwrap(), 0.0);
    }

    #[test]
    fn nn_log_ratio() {
        let phones = Arc::new(PhoneSet::new(["a", "b", "c"]).unwrap());
        let row = [0.2f64.ln(), 0.6f64.ln(), 0.2f64.ln()];
        let m = PosteriorMatrix::new("u", phones, 20.0, RowMatrix::from_rows(&[row]).unwrap()).unwrap();
        assert_abs_diff_eq!(
            nn_gop(&m, &iv("a", 0.0, 0.02)).unwrap(),
            -1.098612,
            epsilon = 1e-6
        );
    }

    #[test]
    fn dnn_examples() {
        let phones = PhoneSet::new(["a", "b"]).unwrap();
        let m = matrix(&[[0.0, 0.0]]);
        let quarter = PhonePrior::new(phones.clone(), vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(dnn_gop(&m, &iv("a", 0.0, 0.02), &quarter).unwrap(), 2.0, epsilon = 1e-12);
        let half = PhonePrior::new(phones.clone(), vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(dnn_gop(&m, &iv("a", 0.0, 0.02), &half).unwrap(), 1.0, epsilon = 1e-12);

        let m = matrix(&[from_probs([0.03, 0.97])]);
        let p = PhonePrior::new(phones, vec![0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(dnn_gop(&m, &iv("a", 0.0, 0.02), &p).unwrap(), 0.1, epsilon = 1e-12);

        let other = PhonePrior::new(PhoneSet::new(["x", "y"]).unwrap(), vec![0.5, 0.5]).unwrap();
        assert_eq!(
            dnn_gop(&m, &iv("a", 0.0, 0.02), &other),
            Err(GopError::PriorPhoneSetMismatch)
        );
    }
}
