//! Scores a synthetic utterance with GMM-GoP, NN-GoP and DNN-GoP.
//!
//! ```text
//! cargo run --example gop_scoring
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use rubriclab::gop::{
    estimate_priors, utterance_gop, GopVariant, PhoneInterval, PosteriorMatrix, UtteranceAlignment,
};
use rubriclab::model::PhoneSet;
use rubriclab::RowMatrix;

const SHIFT_MS: f64 = 20.0;

fn main() {
    let phones = PhoneSet::new(["a", "k", "t", "sil"]).unwrap();
    // (phone the acoustics favour, canonical phone, frames)
    let segments = [("sil", "sil", 3), ("k", "k", 4), ("a", "a", 6), ("k", "t", 5), ("sil", "sil", 2)];

    let mut logits = Vec::new();
    let mut intervals = Vec::new();
    let mut frame = 0;
    for (heard, canonical, frames) in segments {
        let column = phones.index_of(heard).unwrap();
        for _ in 0..frames {
            logits.extend((0..phones.len()).map(|j| if j == column { 3.0 } else { 0.0 }));
        }
        let start = frame as f64 * SHIFT_MS / 1000.0;
        frame += frames;
        let end = frame as f64 * SHIFT_MS / 1000.0;
        intervals.push(PhoneInterval::new(canonical, start, end).unwrap());
    }

    let matrix = RowMatrix::new(frame, phones.len(), logits).unwrap();
    let posteriors = PosteriorMatrix::new("demo", Arc::new(phones.clone()), SHIFT_MS, matrix).unwrap();
    let silence: BTreeSet<String> = ["sil".to_string()].into();
    let alignment = UtteranceAlignment::new("demo", intervals, silence).unwrap();
    let priors = estimate_priors(std::slice::from_ref(&alignment), &phones, SHIFT_MS, 1.0).unwrap();

    for variant in [GopVariant::Gmm, GopVariant::Nn, GopVariant::Dnn] {
        let p = (variant == GopVariant::Dnn).then_some(&priors);
        let result = utterance_gop(&posteriors, &alignment, variant, p).unwrap();
        let per_phone: Vec<String> = result
            .per_phone
            .iter()
            .map(|s| format!("{}={:.3}", s.interval.phone, s.value))
            .collect();
        println!("{variant}: utterance {:.4}  [{}]", result.utterance_value, per_phone.join(" "));
    }
}
