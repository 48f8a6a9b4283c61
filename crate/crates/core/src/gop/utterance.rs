use rayon::prelude::*;
use serde::Serialize;

use super::{
    dnn_gop, gmm_gop, nn_gop, GopError, GopVariant, PhoneInterval, PhonePrior, PosteriorMatrix,
    UtteranceAlignment,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhoneScore {
    pub interval: PhoneInterval,
    pub value: f64,
}

/// A phone left out of the utterance mean, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPhone {
    pub interval: PhoneInterval,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GopResult {
    pub utterance_id: String,
    pub variant: GopVariant,
    pub per_phone: Vec<PhoneScore>,
    /// Unweighted mean of `per_phone` values.
    pub utterance_value: f64,
    pub diagnostics: Vec<SkippedPhone>,
}

/// Scores every non-silence phone of an utterance and averages them.
///
/// Phones that map to no frames are reported in `diagnostics` and left out
/// of the mean; the call only fails when nothing is left to average.
pub fn utterance_gop(
    matrix: &PosteriorMatrix,
    alignment: &UtteranceAlignment,
    variant: GopVariant,
    priors: Option<&PhonePrior>,
) -> Result<GopResult, GopError> {
    if matrix.utterance_id() != alignment.utterance_id {
        return Err(GopError::UtteranceMismatch {
            matrix: matrix.utterance_id().to_string(),
            alignment: alignment.utterance_id.clone(),
        });
    }
    let priors = match (variant, priors) {
        (GopVariant::Dnn, None) => return Err(GopError::MissingPriors),
        (GopVariant::Dnn, Some(p)) => Some(p),
        (v, Some(_)) => return Err(GopError::UnexpectedPriors(v)),
        (_, None) => None,
    };

    let mut per_phone = Vec::new();
    let mut diagnostics = Vec::new();
    for iv in alignment.speech_intervals() {
        let score = match variant {
            GopVariant::Gmm => gmm_gop(matrix, iv),
            GopVariant::Nn => nn_gop(matrix, iv),
            GopVariant::Dnn => dnn_gop(matrix, iv, priors.expect("checked above")),
        };
        match score {
            Ok(value) => per_phone.push(PhoneScore {
                interval: iv.clone(),
                value,
            }),
            Err(e @ (GopError::ZeroFramePhone { .. } | GopError::OutsideMatrix { .. })) => {
                diagnostics.push(SkippedPhone {
                    interval: iv.clone(),
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    if per_phone.is_empty() {
        return Err(GopError::NoScorablePhones(alignment.utterance_id.clone()));
    }
    let utterance_value =
        per_phone.iter().map(|p| p.value).sum::<f64>() / per_phone.len() as f64;
    Ok(GopResult {
        utterance_id: alignment.utterance_id.clone(),
        variant,
        per_phone,
        utterance_value,
        diagnostics,
    })
}

/// Scores many utterances in parallel. Results come back sorted by
/// utterance id whatever the execution order.
pub fn score_corpus(
    pairs: &[(&PosteriorMatrix, &UtteranceAlignment)],
    variant: GopVariant,
    priors: Option<&PhonePrior>,
) -> Vec<(String, Result<GopResult, GopError>)> {
    let mut out: Vec<(String, Result<GopResult, GopError>)> = pairs
        .par_iter()
        .map(|(m, a)| {
            (
                a.utterance_id.clone(),
                utterance_gop(m, a, variant, priors),
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
