use serde::{Deserialize, Serialize};

use super::score::frame_position;
use super::{GopError, UtteranceAlignment};
use crate::model::PhoneSet;

/// Laplace smoothing applied to frame counts when none is given.
pub const DEFAULT_PRIOR_SMOOTHING: f64 = 1.0;

/// Marginal probability of each phone, indexed like the phone set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct PhonePrior {
    phone_set: PhoneSet,
    prior: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    phone_set: PhoneSet,
    prior: Vec<f64>,
}

impl TryFrom<RawPrior> for PhonePrior {
    type Error = GopError;

    fn try_from(raw: RawPrior) -> Result<Self, Self::Error> {
        Self::new(raw.phone_set, raw.prior)
    }
}

impl PhonePrior {
    pub fn new(phone_set: PhoneSet, prior: Vec<f64>) -> Result<Self, GopError> {
        if prior.len() != phone_set.len() {
            return Err(GopError::InvalidPriors(format!(
                "{} values for {} phones",
                prior.len(),
                phone_set.len()
            )));
        }
        if let Some(i) = prior.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(GopError::InvalidPriors(format!(
                "prior of {:?} is {}",
                phone_set.symbols()[i],
                prior[i]
            )));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GopError::InvalidPriors(format!("values sum to {total}")));
        }
        Ok(Self { phone_set, prior })
    }

    pub fn phone_set(&self) -> &PhoneSet {
        &self.phone_set
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prior
    }

    pub fn get(&self, phone: &str) -> Option<f64> {
        self.phone_set.index_of(phone).map(|i| self.prior[i])
    }
}

/// Frame-frequency priors over non-silence intervals with additive smoothing:
/// `(frames(p) + alpha) / (total + alpha * |phones|)`.
///
/// Interval lengths are converted to frames the same way
/// [`frames_of`](super::frames_of) does, without clamping to any matrix.
pub fn estimate_priors(
    alignments: &[UtteranceAlignment],
    phone_set: &PhoneSet,
    frame_shift_ms: f64,
    alpha: f64,
) -> Result<PhonePrior, GopError> {
    if !(frame_shift_ms.is_finite() && frame_shift_ms > 0.0) {
        return Err(GopError::InvalidFrameShift(frame_shift_ms));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(GopError::InvalidSmoothing(alpha));
    }
    if alignments.is_empty() {
        return Err(GopError::EmptyAlignmentSet);
    }
    let mut counts = vec![0u64; phone_set.len()];
    for alignment in alignments {
        for iv in alignment.speech_intervals() {
            let col = phone_set
                .index_of(&iv.phone)
                .ok_or_else(|| GopError::UnknownPhone(iv.phone.clone()))?;
            let first = frame_position(iv.start, frame_shift_ms).floor();
            let last = frame_position(iv.end, frame_shift_ms).ceil();
            counts[col] += (last - first).max(0.0) as u64;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(GopError::NoSpeechFrames);
    }
    let denom = total as f64 + alpha * phone_set.len() as f64;
    let prior = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
    PhonePrior::new(phone_set.clone(), prior)
}
