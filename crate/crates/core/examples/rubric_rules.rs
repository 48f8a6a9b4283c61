//! Builds an annotation record by hand, validates it and runs the rubric
//! consistency checks.
//!
//! ```text
//! cargo run --example rubric_rules
//! ```

use rubriclab::model::rules::{lint_annotation, qualitative_hint, word_error_fraction};
use rubriclab::model::{
    AnnotationRecord, FluencyAnnotation, GlobalObservations, OccurrenceCount, PhoneticWord,
    ProsodyAnnotation, QualitativeLevel, SodaFlags,
};

fn main() {
    let none = OccurrenceCount::None;
    // "the cat sat on mats", with a distorted /s/ in "sat"
    let mut words: Vec<PhoneticWord> = (0..5)
        .map(|word_index| PhoneticWord { word_index, soda: SodaFlags::default() })
        .collect();
    words[2].soda.distortion = true;

    let mut record = AnnotationRecord {
        utterance_id: "demo-01".into(),
        evaluator_id: "e1".into(),
        revision: 1,
        phonetic_words: words,
        phonetic_level: QualitativeLevel::L3,
        phonetic_observations: Some("lateral /s/".into()),
        fluency: FluencyAnnotation {
            blocks: OccurrenceCount::One,
            prolongations: none,
            sound_repetitions: none,
            word_repetitions: none,
            interjections: none,
            level: QualitativeLevel::L3,
        },
        prosody: ProsodyAnnotation {
            accent: none,
            grouping: none,
            modality: none,
            level: QualitativeLevel::L3,
        },
        global: GlobalObservations::default(),
        timestamp: chrono::Utc::now(),
    };

    record.validate().expect("structurally valid");
    let fraction = word_error_fraction(&record).unwrap();
    println!("words with errors: {:.0}%", fraction * 100.0);
    println!("suggested phonetic level: {}", qualitative_hint(fraction).unwrap());

    for warning in lint_annotation(&record) {
        println!("warning: {warning}");
    }

    record.phonetic_level = QualitativeLevel::L2;
    record.fluency.level = QualitativeLevel::L2;
    println!("after revising levels: {} warnings", lint_annotation(&record).len());

    match record.validate_for_utterance(6) {
        Ok(()) => println!("unexpectedly valid"),
        Err(e) => println!("against a six-word utterance: {e}"),
    }
    println!("{}", serde_json::to_string(&record.fluency).unwrap());
}
