//! The annotation rubric as typed, validated values.
//!
//! An [`AnnotationRecord`] is one evaluator's judgment of one utterance across
//! the three rubric dimensions (phonetics, fluency, prosody) plus global voice
//! observations. Records are plain values; [`AnnotationRecord::validate`]
//! checks the structural invariants and [`rules`] holds the label-level rules.

mod phone_set;
pub mod rules;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use phone_set::PhoneSet;
pub use rules::{
    binarize_disfluency, lint_annotation, qualitative_hint, word_error_fraction, LintWarning,
};

/// JSON Schema (draft 2020-12) of a serialized [`AnnotationRecord`].
pub const ANNOTATION_RECORD_SCHEMA: &str = include_str!("../../schema/annotation-record.schema.json");

/// Maximum length, in characters, of the global free-text observation.
pub const MAX_FREE_TEXT_CHARS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("phone set is empty")]
    EmptyPhoneSet,
    #[error("duplicate phone symbol {0:?}")]
    DuplicatePhone(String),
    #[error("unknown phone symbol {0:?}")]
    UnknownPhone(String),
    #[error("empty utterance")]
    EmptyUtterance,
    #[error("error fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("invalid qualitative level {0} (expected 1-4)")]
    InvalidLevel(i64),
    #[error("invalid occurrence count {0:?} (expected none, one or multiple)")]
    InvalidCount(String),
    #[error("invalid speaker group {0:?} (expected DS or TD)")]
    InvalidSpeakerGroup(String),
    #[error("unknown disfluency {0:?}")]
    UnknownDisfluency(String),
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
}

/// One violated invariant, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationErrors(pub Vec<FieldError>);

impl ValidationErrors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Prefixes every path, e.g. `records[3]`.
    pub fn nest(mut self, prefix: &str) -> Self {
        for e in &mut self.0 {
            e.path = format!("{prefix}.{}", e.path);
        }
        self
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "invalid annotation: {}", parts.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

/// A word of the prompt text with its canonical pronunciation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordToken {
    pub index: usize,
    pub surface: String,
    #[serde(default)]
    pub canonical_phones: Vec<String>,
}

impl WordToken {
    pub fn validate(&self, phones: &PhoneSet) -> Result<(), ModelError> {
        if self.surface.trim().is_empty() {
            let mut errs = ValidationErrors::default();
            errs.push(format!("words[{}].surface", self.index), "must not be empty");
            return Err(errs.into());
        }
        match self
            .canonical_phones
            .iter()
            .find(|p| phones.index_of(p).is_none())
        {
            Some(p) => Err(ModelError::UnknownPhone(p.clone())),
            None => Ok(()),
        }
    }
}

/// Segmental articulation errors marked on a word.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SodaFlags {
    pub substitution: bool,
    pub omission: bool,
    pub distortion: bool,
    pub addition: bool,
}

impl SodaFlags {
    pub fn has_error(&self) -> bool {
        self.substitution || self.omission || self.distortion || self.addition
    }
}

/// How often a fluency or prosody deviation occurred in an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccurrenceCount {
    None,
    One,
    Multiple,
}

impl OccurrenceCount {
    pub const ALL: [OccurrenceCount; 3] = [Self::None, Self::One, Self::Multiple];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::One => "one",
            Self::Multiple => "multiple",
        }
    }
}

impl fmt::Display for OccurrenceCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OccurrenceCount {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "one" => Ok(Self::One),
            "multiple" => Ok(Self::Multiple),
            other => Err(ModelError::InvalidCount(other.to_string())),
        }
    }
}

/// Rubric qualitative score. `L4` only exists for typically-developing
/// reference utterances in the four-level correlation protocol and is never
/// accepted in an [`AnnotationRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualitativeLevel {
    L1,
    L2,
    L3,
    L4,
}

impl QualitativeLevel {
    pub fn value(self) -> u8 {
        match self {
            Self::L1 => 1,
            Self::L2 => 2,
            Self::L3 => 3,
            Self::L4 => 4,
        }
    }

    pub fn from_value(v: i64) -> Result<Self, ModelError> {
        match v {
            1 => Ok(Self::L1),
            2 => Ok(Self::L2),
            3 => Ok(Self::L3),
            4 => Ok(Self::L4),
            other => Err(ModelError::InvalidLevel(other)),
        }
    }
}

impl fmt::Display for QualitativeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for QualitativeLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.value())
    }
}

impl<'de> Deserialize<'de> for QualitativeLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Self::from_value(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluencyAnnotation {
    pub blocks: OccurrenceCount,
    pub prolongations: OccurrenceCount,
    pub sound_repetitions: OccurrenceCount,
    pub word_repetitions: OccurrenceCount,
    pub interjections: OccurrenceCount,
    pub level: QualitativeLevel,
}

impl FluencyAnnotation {
    pub fn count(&self, d: Disfluency) -> OccurrenceCount {
        match d {
            Disfluency::Blocks => self.blocks,
            Disfluency::Prolongations => self.prolongations,
            Disfluency::SoundRepetitions => self.sound_repetitions,
            Disfluency::WordRepetitions => self.word_repetitions,
            Disfluency::Interjections => self.interjections,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProsodyAnnotation {
    pub accent: OccurrenceCount,
    pub grouping: OccurrenceCount,
    pub modality: OccurrenceCount,
    pub level: QualitativeLevel,
}

impl ProsodyAnnotation {
    pub fn categories(&self) -> [(&'static str, OccurrenceCount); 3] {
        [
            ("accent", self.accent),
            ("grouping", self.grouping),
            ("modality", self.modality),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalObservations {
    pub atypical_pitch: bool,
    pub atypical_volume: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

/// SODA flags for one word of the utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhoneticWord {
    pub word_index: usize,
    pub soda: SodaFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub utterance_id: String,
    pub evaluator_id: String,
    pub revision: u32,
    pub phonetic_words: Vec<PhoneticWord>,
    pub phonetic_level: QualitativeLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonetic_observations: Option<String>,
    pub fluency: FluencyAnnotation,
    pub prosody: ProsodyAnnotation,
    pub global: GlobalObservations,
    pub timestamp: DateTime<Utc>,
}

impl AnnotationRecord {
    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::default();
        if self.utterance_id.trim().is_empty() {
            errs.push("utterance_id", "must not be empty");
        }
        if self.evaluator_id.trim().is_empty() {
            errs.push("evaluator_id", "must not be empty");
        }
        if self.revision < 1 {
            errs.push("revision", "must be at least 1");
        }
        let n = self.phonetic_words.len();
        if n == 0 {
            errs.push("phonetic_words", "empty utterance");
        }
        let mut seen = BTreeSet::new();
        for (pos, w) in self.phonetic_words.iter().enumerate() {
            if w.word_index >= n {
                errs.push(
                    format!("phonetic_words[{pos}].word_index"),
                    format!("index {} out of range for {n} words", w.word_index),
                );
            } else if !seen.insert(w.word_index) {
                errs.push(
                    format!("phonetic_words[{pos}].word_index"),
                    format!("word {} listed more than once", w.word_index),
                );
            }
        }
        for (path, level) in [
            ("phonetic_level", self.phonetic_level),
            ("fluency.level", self.fluency.level),
            ("prosody.level", self.prosody.level),
        ] {
            if level == QualitativeLevel::L4 {
                errs.push(path, "level 4 is reserved for reference utterances");
            }
        }
        if let Some(text) = &self.global.free_text {
            let chars = text.chars().count();
            if chars > MAX_FREE_TEXT_CHARS {
                errs.push(
                    "global.free_text",
                    format!("{chars} characters exceeds limit of {MAX_FREE_TEXT_CHARS}"),
                );
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// [`validate`](Self::validate) plus the word count of the prompt the
    /// record annotates.
    pub fn validate_for_utterance(&self, word_count: usize) -> Result<(), ValidationErrors> {
        let mut errs = match self.validate() {
            Ok(()) => ValidationErrors::default(),
            Err(e) => e,
        };
        if self.phonetic_words.len() != word_count {
            errs.push(
                "phonetic_words",
                format!(
                    "covers {} words but the utterance has {word_count}",
                    self.phonetic_words.len()
                ),
            );
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// The five fluency deviation types, which double as the binary
/// disfluency-detection tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disfluency {
    Blocks,
    Prolongations,
    SoundRepetitions,
    WordRepetitions,
    Interjections,
}

impl Disfluency {
    pub const ALL: [Disfluency; 5] = [
        Self::Blocks,
        Self::Prolongations,
        Self::SoundRepetitions,
        Self::WordRepetitions,
        Self::Interjections,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Blocks => "blocks",
            Self::Prolongations => "prolongations",
            Self::SoundRepetitions => "sound_repetitions",
            Self::WordRepetitions => "word_repetitions",
            Self::Interjections => "interjections",
        }
    }
}

impl fmt::Display for Disfluency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Disfluency {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ModelError::UnknownDisfluency(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeakerGroup {
    /// Speakers with Down syndrome.
    DS,
    /// Typically developing reference speakers.
    TD,
}

impl std::str::FromStr for SpeakerGroup {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DS" | "ds" => Ok(Self::DS),
            "TD" | "td" => Ok(Self::TD),
            other => Err(ModelError::InvalidSpeakerGroup(other.to_string())),
        }
    }
}
