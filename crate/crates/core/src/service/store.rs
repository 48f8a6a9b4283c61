use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crate::io::{read_annotations, render_annotations_json, write_atomic, IoError};
use crate::model::{lint_annotation, AnnotationRecord, LintWarning, ValidationErrors};

/// File holding every stored record, in the annotation export format.
pub const STORE_FILE: &str = "annotations.json";

type Key = (String, String);

/// Immutable view of the store at one point in time.
#[derive(Debug, Default)]
pub struct Snapshot {
    records: BTreeMap<Key, AnnotationRecord>,
}

impl Snapshot {
    /// All records ordered by utterance id, then evaluator id.
    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.values()
    }

    pub fn for_utterance<'a>(&'a self, utterance_id: &'a str) -> impl Iterator<Item = &'a AnnotationRecord> + 'a {
        self.records
            .range((utterance_id.to_string(), String::new())..)
            .take_while(move |((u, _), _)| u == utterance_id)
            .map(|(_, r)| r)
    }

    pub fn get(&self, utterance_id: &str, evaluator_id: &str) -> Option<&AnnotationRecord> {
        self.records
            .get(&(utterance_id.to_string(), evaluator_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug)]
pub enum SubmitError {
    Invalid(ValidationErrors),
    Conflict { expected: u32, current: u32 },
    Storage(IoError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submitted {
    pub revision: u32,
    pub created: bool,
    pub warnings: Vec<LintWarning>,
}

/// Single-file annotation store with optimistic concurrency.
///
/// Writers are serialized and persist through write-then-rename before the
/// new snapshot becomes visible; readers grab the current snapshot and are
/// never blocked by an in-flight write.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    writer: Mutex<()>,
    current: RwLock<Arc<Snapshot>>,
}

impl Store {
    /// Opens `<data_dir>/annotations.json`, starting empty if it is absent.
    pub fn open(data_dir: &Path) -> Result<Self, IoError> {
        let path = data_dir.join(STORE_FILE);
        let mut records = BTreeMap::new();
        if path.exists() {
            for r in read_annotations(&path)?.records {
                records.insert((r.utterance_id.clone(), r.evaluator_id.clone()), r);
            }
        }
        Ok(Self {
            path,
            writer: Mutex::new(()),
            current: RwLock::new(Arc::new(Snapshot { records })),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("store lock").clone()
    }

    /// Stores `record` as revision `expected_revision + 1` of its
    /// (utterance, evaluator) slot if the slot is currently at
    /// `expected_revision` (0 for "not yet annotated").
    pub fn submit(
        &self,
        mut record: AnnotationRecord,
        expected_revision: u32,
        word_count: usize,
    ) -> Result<Submitted, SubmitError> {
        record.revision = expected_revision.saturating_add(1);
        record
            .validate_for_utterance(word_count)
            .map_err(SubmitError::Invalid)?;

        let _guard = self.writer.lock().expect("writer lock");
        let snapshot = self.snapshot();
        let key = (record.utterance_id.clone(), record.evaluator_id.clone());
        let current = snapshot.records.get(&key).map_or(0, |r| r.revision);
        if current != expected_revision {
            return Err(SubmitError::Conflict {
                expected: expected_revision,
                current,
            });
        }

        let warnings = lint_annotation(&record);
        let revision = record.revision;
        let mut records = snapshot.records.clone();
        records.insert(key, record);
        let all: Vec<AnnotationRecord> = records.values().cloned().collect();
        write_atomic(&self.path, &render_annotations_json(&all)).map_err(SubmitError::Storage)?;
        *self.current.write().expect("store lock") = Arc::new(Snapshot { records });
        Ok(Submitted {
            revision,
            created: current == 0,
            warnings,
        })
    }
}
