use std::cmp::Ordering;

use super::StatsError;

// Inputs are checked finite first, so this is a total order in which
// -0.0 and 0.0 tie.
fn cmp(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("finite values")
}

/// Integer pair statistics from which tau-b is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// n(n-1)/2
    pub pairs: u64,
    /// Pairs tied in x (including pairs tied in both).
    pub tied_x: u64,
    /// Pairs tied in y (including pairs tied in both).
    pub tied_y: u64,
    /// Concordant minus discordant pairs.
    pub score: i64,
}

impl PairCounts {
    pub fn tau_b(&self) -> Result<f64, StatsError> {
        if self.tied_x == self.pairs || self.tied_y == self.pairs {
            return Err(StatsError::UndefinedCorrelation);
        }
        let denom = ((self.pairs - self.tied_x) as f64 * (self.pairs - self.tied_y) as f64).sqrt();
        Ok((self.score as f64 / denom).clamp(-1.0, 1.0))
    }
}

fn check(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples(x.len()));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i % x.len()));
    }
    Ok(())
}

/// Quadratic pair enumeration. This is the reference the fast path must
/// reproduce exactly.
pub fn pair_counts_reference(x: &[f64], y: &[f64]) -> Result<PairCounts, StatsError> {
    check(x, y)?;
    let n = x.len();
    let mut counts = PairCounts {
        pairs: (n * (n - 1) / 2) as u64,
        tied_x: 0,
        tied_y: 0,
        score: 0,
    };
    for i in 0..n {
        for j in i + 1..n {
            let dx = cmp(&x[i], &x[j]);
            let dy = cmp(&y[i], &y[j]);
            if dx == Ordering::Equal {
                counts.tied_x += 1;
            }
            if dy == Ordering::Equal {
                counts.tied_y += 1;
            }
            if dx != Ordering::Equal && dy != Ordering::Equal {
                counts.score += if dx == dy { 1 } else { -1 };
            }
        }
    }
    Ok(counts)
}

fn tie_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts strict inversions while sorting `v` ascending.
fn merge_sort_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_inversions(&mut v[..mid], &mut buf[..mid]);
    swaps += merge_sort_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(&v[j], &v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Knight's O(n log n) pair counting.
pub fn pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts, StatsError> {
    check(x, y)?;
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(&a.0, &b.0).then(cmp(&a.1, &b.1)));
    let eq = |a: f64, b: f64| cmp(&a, &b) == Ordering::Equal;
    let tied_x = tie_pairs(&pairs, |a, b| eq(a.0, b.0));
    let tied_both = tie_pairs(&pairs, |a, b| eq(a.0, b.0) && eq(a.1, b.1));
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_sort_inversions(&mut ys, &mut buf);
    let tied_y = tie_pairs(&ys, |a, b| eq(*a, *b));
    let total = (n * (n - 1) / 2) as u64;
    let score = total as i64 - tied_x as i64 - tied_y as i64 + tied_both as i64 - 2 * swaps as i64;
    Ok(PairCounts {
        pairs: total,
        tied_x,
        tied_y,
        score,
    })
}

/// Tie-corrected Kendall rank correlation,
/// `(C - D) / sqrt((n0 - n1)(n0 - n2))`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    pair_counts(x, y)?.tau_b()
}
