use serde::Serialize;

use super::ScoredUtterance;
use crate::model::QualitativeLevel;

/// Box-plot statistics of GoP for one rubric level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: QualitativeLevel,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-level summaries in ascending level order; levels with no
/// utterances are absent.
pub fn group_summary(scored: &[ScoredUtterance]) -> Vec<LevelSummary> {
    [
        QualitativeLevel::L1,
        QualitativeLevel::L2,
        QualitativeLevel::L3,
        QualitativeLevel::L4,
    ]
    .into_iter()
    .filter_map(|level| {
        let mut values: Vec<f64> = scored
            .iter()
            .filter(|s| s.level == level)
            .map(|s| s.gop)
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(LevelSummary {
            level,
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values[0],
            q1: quantile(&values, 0.25),
            median: quantile(&values, 0.5),
            q3: quantile(&values, 0.75),
            max: values[values.len() - 1],
        })
    })
    .collect()
}
