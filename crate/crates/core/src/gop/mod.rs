//! Goodness-of-Pronunciation scoring from frame-level phone logits.
//!
//! Three variants are provided, all computed over the frames a forced
//! alignment assigns to a phone:
//!
//! - [`gmm_gop`]: mean over frames of the log softmax probability of the
//!   canonical phone.
//! - [`nn_gop`]: log of the frame-averaged posterior of the canonical phone
//!   minus the log of the largest frame-averaged posterior.
//! - [`dnn_gop`]: frame-averaged posterior of the canonical phone divided by
//!   its prior, reported as the raw ratio.
//!
//! Every reduction over frames sums its terms in sorted order, so scores are
//! bit-identical under any permutation of the frames within a phone.

mod prior;
mod score;
mod softmax;
mod utterance;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::RowMatrix;
use crate::model::PhoneSet;

pub use prior::{estimate_priors, PhonePrior, DEFAULT_PRIOR_SMOOTHING};
pub use score::{dnn_gop, frames_of, gmm_gop, mean_log_posterior, mean_posterior, nn_gop};
pub use softmax::{log_softmax_row, log_sum_exp, softmax_row};
pub use utterance::{score_corpus, utterance_gop, GopResult, PhoneScore, SkippedPhone};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GopError {
    #[error("frame shift must be positive, got {0} ms")]
    InvalidFrameShift(f64),
    #[error("logit matrix has {found} columns but the phone set has {expected} phones")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("logit matrix has no frames")]
    NoFrames,
    #[error("non-finite logit at frame {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("phone {0:?} is not in the phone set")]
    UnknownPhone(String),
    #[error("interval {start}s-{end}s is not a valid time span")]
    InvalidInterval { start: f64, end: f64 },
    #[error("intervals overlap or are out of order at position {0}")]
    UnorderedIntervals(usize),
    #[error("zero-frame phone {phone:?} at {start}s-{end}s")]
    ZeroFramePhone { phone: String, start: f64, end: f64 },
    #[error("phone {phone:?} ends at {end}s, beyond the {span}s covered by the logits")]
    OutsideMatrix { phone: String, end: f64, span: f64 },
    #[error("priors are required for DNN-GoP")]
    MissingPriors,
    #[error("priors are only used by DNN-GoP, not {0}")]
    UnexpectedPriors(GopVariant),
    #[error("priors must be positive and sum to 1: {0}")]
    InvalidPriors(String),
    #[error("prior phone set differs from the logit phone set")]
    PriorPhoneSetMismatch,
    #[error("no alignments to estimate priors from")]
    EmptyAlignmentSet,
    #[error("alignments contain no speech frames")]
    NoSpeechFrames,
    #[error("smoothing must be finite and non-negative, got {0}")]
    InvalidSmoothing(f64),
    #[error("alignment is for {alignment:?} but logits are for {matrix:?}")]
    UtteranceMismatch { matrix: String, alignment: String },
    #[error("utterance {0:?} has no scorable phones")]
    NoScorablePhones(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GopVariant {
    Gmm,
    Nn,
    Dnn,
}

impl GopVariant {
    pub const ALL: [GopVariant; 3] = [Self::Gmm, Self::Nn, Self::Dnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gmm => "gmm",
            Self::Nn => "nn",
            Self::Dnn => "dnn",
        }
    }
}

impl fmt::Display for GopVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frames x phones logits for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    utterance_id: String,
    phone_set: Arc<PhoneSet>,
    frame_shift_ms: f64,
    logits: RowMatrix,
}

impl PosteriorMatrix {
    pub fn new(
        utterance_id: impl Into<String>,
        phone_set: Arc<PhoneSet>,
        frame_shift_ms: f64,
        logits: RowMatrix,
    ) -> Result<Self, GopError> {
        if !(frame_shift_ms.is_finite() && frame_shift_ms > 0.0) {
            return Err(GopError::InvalidFrameShift(frame_shift_ms));
        }
        if logits.cols() != phone_set.len() {
            return Err(GopError::ColumnMismatch {
                expected: phone_set.len(),
                found: logits.cols(),
            });
        }
        if logits.rows() == 0 {
            return Err(GopError::NoFrames);
        }
        if let Some((row, col)) = logits.first_non_finite() {
            return Err(GopError::NonFinite { row, col });
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            phone_set,
            frame_shift_ms,
            logits,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn phone_set(&self) -> &PhoneSet {
        &self.phone_set
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    pub fn logits(&self) -> &RowMatrix {
        &self.logits
    }

    pub fn frames(&self) -> usize {
        self.logits.rows()
    }

    /// Time covered by the frames, in seconds.
    pub fn span_seconds(&self) -> f64 {
        self.frames() as f64 * self.frame_shift_ms / 1000.0
    }
}

/// One aligned phone. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneInterval {
    pub phone: String,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_index: Option<usize>,
}

impl PhoneInterval {
    pub fn new(phone: impl Into<String>, start: f64, end: f64) -> Result<Self, GopError> {
        let iv = Self {
            phone: phone.into(),
            start,
            end,
            word_index: None,
        };
        iv.check_times()?;
        Ok(iv)
    }

    pub fn with_word(mut self, word_index: usize) -> Self {
        self.word_index = Some(word_index);
        self
    }

    fn check_times(&self) -> Result<(), GopError> {
        if self.start.is_finite() && self.end.is_finite() && 0.0 <= self.start && self.start < self.end
        {
            Ok(())
        } else {
            Err(GopError::InvalidInterval {
                start: self.start,
                end: self.end,
            })
        }
    }
}

/// Time-ordered phone intervals of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceAlignment {
    pub utterance_id: String,
    pub intervals: Vec<PhoneInterval>,
    pub silence_symbols: BTreeSet<String>,
}

impl UtteranceAlignment {
    pub fn new(
        utterance_id: impl Into<String>,
        intervals: Vec<PhoneInterval>,
        silence_symbols: BTreeSet<String>,
    ) -> Result<Self, GopError> {
        for iv in &intervals {
            iv.check_times()?;
        }
        if let Some(pos) = intervals
            .windows(2)
            .position(|w| w[1].start < w[0].end)
        {
            return Err(GopError::UnorderedIntervals(pos + 1));
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            intervals,
            silence_symbols,
        })
    }

    pub fn is_silence(&self, interval: &PhoneInterval) -> bool {
        self.silence_symbols.contains(&interval.phone)
    }

    pub fn speech_intervals(&self) -> impl Iterator<Item = &PhoneInterval> + '_ {
        self.intervals.iter().filter(|iv| !self.is_silence(iv))
    }
}

/// Silence symbols used when none are configured.
pub fn default_silence_symbols() -> BTreeSet<String> {
    ["sil", "sp", "spn"].into_iter().map(String::from).collect()
}
