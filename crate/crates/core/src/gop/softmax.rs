/// `ln(sum(exp(v)))` with max subtraction. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|v| v - lse).collect()
}

pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    log_softmax_row(logits).into_iter().map(f64::exp).collect()
}

/// [`log_sum_exp`] over values summed in ascending order, which makes the
/// result independent of input order.
pub(crate) fn sorted_log_sum_exp(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    log_sum_exp(values)
}
