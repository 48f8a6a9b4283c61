//! Label-level rubric rules: the 25% sporadic/frequent boundary, disfluency
//! binarization and non-blocking consistency lints.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, ModelError, OccurrenceCount, QualitativeLevel};

/// Largest share of erroneous words that still counts as "sporadic".
pub const SPORADIC_MAX_FRACTION: f64 = 0.25;

/// Share of words carrying at least one SODA flag.
pub fn word_error_fraction(record: &AnnotationRecord) -> Result<f64, ModelError> {
    let total = record.phonetic_words.len();
    if total == 0 {
        return Err(ModelError::EmptyUtterance);
    }
    let flagged = record
        .phonetic_words
        .iter()
        .filter(|w| w.soda.has_error())
        .count();
    Ok(flagged as f64 / total as f64)
}

/// Level suggested by the error fraction: no errors is level 3, errors in
/// at most a quarter of the words is level 2, anything above is level 1.
///
/// This is only a hint to compare against the evaluator's own level.
pub fn qualitative_hint(fraction: f64) -> Result<QualitativeLevel, ModelError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ModelError::FractionOutOfRange(fraction));
    }
    Ok(if fraction == 0.0 {
        QualitativeLevel::L3
    } else if fraction <= SPORADIC_MAX_FRACTION {
        QualitativeLevel::L2
    } else {
        QualitativeLevel::L1
    })
}

/// Any occurrence, one or more, counts as a disfluency.
pub fn binarize_disfluency(count: OccurrenceCount) -> bool {
    count > OccurrenceCount::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum LintWarning {
    PhoneticLevelMismatch {
        level: QualitativeLevel,
        hint: QualitativeLevel,
        error_fraction: f64,
    },
    FluencyErrorsAtLevel3 { categories: Vec<String> },
    ProsodyMultipleAtLevel3 { categories: Vec<String> },
}

impl fmt::Display for LintWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PhoneticLevelMismatch {
                level,
                hint,
                error_fraction,
            } => write!(
                f,
                "phonetic level {level} differs from level {hint} implied by {:.1}% of words with errors",
                error_fraction * 100.0
            ),
            Self::FluencyErrorsAtLevel3 { categories } => write!(
                f,
                "fluency level 3 means no fluency errors, but {} recorded",
                categories.join(", ")
            ),
            Self::ProsodyMultipleAtLevel3 { categories } => write!(
                f,
                "prosody level 3 with repeated deviations in {}",
                categories.join(", ")
            ),
        }
    }
}

/// Consistency checks between a record's counts and its qualitative levels.
/// Never fails; an empty list means the record is self-consistent.
pub fn lint_annotation(record: &AnnotationRecord) -> Vec<LintWarning> {
    let mut warnings = Vec::new();

    if let Ok(fraction) = word_error_fraction(record) {
        if let Ok(hint) = qualitative_hint(fraction) {
            if hint != record.phonetic_level {
                warnings.push(LintWarning::PhoneticLevelMismatch {
                    level: record.phonetic_level,
                    hint,
                    error_fraction: fraction,
                });
            }
        }
    }

    if record.fluency.level == QualitativeLevel::L3 {
        let categories: Vec<String> = crate::model::Disfluency::ALL
            .into_iter()
            .filter(|d| record.fluency.count(*d) != OccurrenceCount::None)
            .map(|d| d.as_str().to_string())
            .collect();
        if !categories.is_empty() {
            warnings.push(LintWarning::FluencyErrorsAtLevel3 { categories });
        }
    }

    if record.prosody.level == QualitativeLevel::L3 {
        let categories: Vec<String> = record
            .prosody
            .categories()
            .into_iter()
            .filter(|(_, c)| *c == OccurrenceCount::Multiple)
            .map(|(name, _)| name.to_string())
            .collect();
        if !categories.is_empty() {
            warnings.push(LintWarning::ProsodyMultipleAtLevel3 { categories });
        }
    }

    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::clean_record;
    use crate::model::SodaFlags;
    use proptest::prelude::*;

    fn flag(record: &mut AnnotationRecord, word: usize) {
        record.phonetic_words[word].soda = SodaFlags {
            omission: true,
            ..Default::default()
        };
    }

    #[test]
    fn fraction_examples() {
        let mut r = clean_record(4);
        assert_eq!(word_error_fraction(&r).unwrap(), 0.0);
        flag(&mut r, 2);
        assert_eq!(word_error_fraction(&r).unwrap(), 0.25);
        assert_eq!(
            word_error_fraction(&clean_record(0)),
            Err(ModelError::EmptyUtterance)
        );
    }

    #[test]
    fn corpus_distortion_share() {
        // 1,799 distortion marks over 6,845 words.
        let share = 1799.0 / 6845.0 * 100.0;
        assert_eq!(format!("{share:.1}"), "26.3");
    }

    #[test]
    fn hint_boundaries() {
        assert_eq!(qualitative_hint(0.0).unwrap(), QualitativeLevel::L3);
        assert_eq!(qualitative_hint(0.25).unwrap(), QualitativeLevel::L2);
        assert_eq!(qualitative_hint(0.26).unwrap(), QualitativeLevel::L1);
        assert_eq!(qualitative_hint(0.5).unwrap(), QualitativeLevel::L1);
        assert_eq!(qualitative_hint(1.0).unwrap(), QualitativeLevel::L1);
        assert!(qualitative_hint(-0.01).is_err());
        assert!(qualitative_hint(1.01).is_err());
        assert!(qualitative_hint(f64::NAN).is_err());
    }

    #[test]
    fn binarize_truth_table() {
        assert!(!binarize_disfluency(OccurrenceCount::None));
        assert!(binarize_disfluency(OccurrenceCount::One));
        assert!(binarize_disfluency(OccurrenceCount::Multiple));
    }

    #[test]
    fn lint_consistent_record() {
        assert!(lint_annotation(&clean_record(4)).is_empty());
    }

    #[test]
    fn lint_blocks_at_level_3() {
        let mut r = clean_record(4);
        r.fluency.blocks = OccurrenceCount::Multiple;
        let w = lint_annotation(&r);
        assert_eq!(
            w,
            [LintWarning::FluencyErrorsAtLevel3 {
                categories: vec!["blocks".to_string()]
            }]
        );
    }

    #[test]
    fn lint_half_flagged_at_level_3() {
        let mut r = clean_record(4);
        flag(&mut r, 0);
        flag(&mut r, 3);
        let w = lint_annotation(&r);
        assert_eq!(
            w,
            [LintWarning::PhoneticLevelMismatch {
                level: QualitativeLevel::L3,
                hint: QualitativeLevel::L1,
                error_fraction: 0.5
            }]
        );
        assert!(w[0].to_string().contains("50.0%"));
    }

    #[test]
    fn lint_prosody_multiple_at_level_3() {
        let mut r = clean_record(2);
        r.prosody.grouping = OccurrenceCount::One;
        assert!(lint_annotation(&r).is_empty());
        r.prosody.modality = OccurrenceCount::Multiple;
        assert_eq!(lint_annotation(&r).len(), 1);
    }

    fn arb_soda() -> impl Strategy<Value = SodaFlags> {
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
            |(substitution, omission, distortion, addition)| SodaFlags {
                substitution,
                omission,
                distortion,
                addition,
            },
        )
    }

    proptest! {
        #[test]
        fn hint_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(qualitative_hint(lo).unwrap() >= qualitative_hint(hi).unwrap());
        }

        #[test]
        fn fraction_ignores_word_order(flags in prop::collection::vec(arb_soda(), 1..12), seed in any::<u64>()) {
            let mut r = clean_record(flags.len());
            for (w, f) in r.phonetic_words.iter_mut().zip(&flags) {
                w.soda = *f;
            }
            let before = word_error_fraction(&r).unwrap();
            let n = r.phonetic_words.len();
            r.phonetic_words.rotate_left((seed as usize) % n);
            r.phonetic_words.reverse();
            prop_assert_eq!(before, word_error_fraction(&r).unwrap());
        }

        #[test]
        fn consistent_records_have_no_lints(flags in prop::collection::vec(arb_soda(), 1..12)) {
            let mut r = clean_record(flags.len());
            for (w, f) in r.phonetic_words.iter_mut().zip(&flags) {
                w.soda = *f;
            }
            r.phonetic_level = qualitative_hint(word_error_fraction(&r).unwrap()).unwrap();
            prop_assert!(lint_annotation(&r).is_empty());
        }
    }
}
