use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, IoError, Location};
use crate::model::{PhoneSet, SpeakerGroup, WordToken};

/// One recording of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestUtterance {
    pub id: String,
    pub transcript: String,
    pub words: Vec<WordToken>,
    pub speaker_id: String,
    pub speaker_group: SpeakerGroup,
    /// Relative paths resolve against the manifest's directory.
    pub audio_path: PathBuf,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone_set: Option<PhoneSet>,
    pub utterances: Vec<ManifestUtterance>,
}

impl CorpusManifest {
    pub fn get(&self, id: &str) -> Option<&ManifestUtterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Checks unique ids, positive durations, contiguous word indices and,
    /// when a phone set is declared, canonical phone membership. Errors are
    /// `(field path, message)`.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let mut ids = BTreeSet::new();
        for (i, u) in self.utterances.iter().enumerate() {
            let at = |field: &str| format!("utterances[{i}].{field}");
            if u.id.trim().is_empty() {
                return Err((at("id"), "must not be empty".into()));
            }
            if !ids.insert(u.id.as_str()) {
                return Err((at("id"), format!("duplicate utterance id `{}`", u.id)));
            }
            if !(u.duration_s.is_finite() && u.duration_s > 0.0) {
                return Err((at("duration_s"), format!("must be positive, got {}", u.duration_s)));
            }
            if u.words.is_empty() {
                return Err((at("words"), "empty utterance".into()));
            }
            for (j, w) in u.words.iter().enumerate() {
                if w.index != j {
                    return Err((
                        at(&format!("words[{j}].index")),
                        format!("expected {j}, got {}", w.index),
                    ));
                }
                if let Some(set) = &self.phone_set {
                    w.validate(set)
                        .map_err(|e| (at(&format!("words[{j}]")), e.to_string()))?;
                } else if w.surface.trim().is_empty() {
                    return Err((at(&format!("words[{j}].surface")), "must not be empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Audio location of an utterance relative to `base`.
    pub fn audio_file(&self, utterance: &ManifestUtterance, base: &Path) -> PathBuf {
        if utterance.audio_path.is_absolute() {
            utterance.audio_path.clone()
        } else {
            base.join(&utterance.audio_path)
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest, IoError> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let manifest: CorpusManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        IoError::invalid(path, Location::Field(field), e.into_inner().to_string())
    })?;
    manifest
        .validate()
        .map_err(|(field, msg)| IoError::invalid(path, Location::Field(field), msg))?;
    Ok(manifest)
}
