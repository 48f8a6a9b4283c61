//! Readers and writers for every on-disk format.
//!
//! Readers reject malformed input instead of repairing it, and every error
//! names the file and a byte offset, CSV line or JSON field path. The
//! formats themselves are documented in `formats.md` at the repository
//! root.

mod alignments;
mod annotations;
mod container;
mod layout;
mod manifest;
mod tables;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

pub use alignments::{
    parse_alignments, read_alignments, render_alignments, write_alignments, ALIGNMENT_HEADER,
};
pub use annotations::{
    parse_annotations_csv, parse_annotations_json, read_annotations, read_annotations_csv,
    render_annotations_csv, render_annotations_json, write_annotations, write_annotations_csv,
    AnnotationExport, ANNOTATION_CSV_HEADER,
};
pub use container::{
    decode_container, encode_container, read_container, write_container, Container,
    ContainerHeader,
};
pub use layout::{
    embedding_path, load_pooled_layers, posterior_path, read_embedding_dir, read_posteriors,
    write_pooled, PooledLayers, POOLED_INDEX,
};
pub use manifest::{read_manifest, CorpusManifest, ManifestUtterance};
pub use tables::{
    read_labels, read_scored, render_eval_csv, render_grid_csv, render_labels, render_score_rows,
    render_summary_csv, render_stats_tables, write_labels, write_score_rows, LabelTable, ScoreRow,
    SCORE_HEADER, STATS_TABLE_FILES,
};

/// Where in a file an error was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(u64),
    Field(String),
    File,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Byte(b) => write!(f, "byte {b}"),
            Self::Line(l) => write!(f, "line {l}"),
            Self::Field(p) if p.is_empty() || p == "." => f.write_str("document"),
            Self::Field(p) => write!(f, "field {p}"),
            Self::File => f.write_str("file"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {at}: {message}")]
    Invalid {
        path: PathBuf,
        at: Location,
        message: String,
    },
}

impl IoError {
    pub(crate) fn invalid(path: &Path, at: Location, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.to_path_buf(),
            at,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| {
        IoError::invalid(
            path,
            Location::Byte(e.utf8_error().valid_up_to() as u64),
            "invalid UTF-8",
        )
    })
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}-{n}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| IoError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| IoError::io(path, e))
}

/// CSV reader over in-memory text with the shared dialect: comma separated,
/// header row required, no ragged rows.
pub(crate) fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> IoError {
    let at = match e.position() {
        Some(p) => Location::Line(p.line()),
        None => Location::File,
    };
    IoError::invalid(path, at, e.to_string())
}

pub(crate) fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<(), IoError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(IoError::invalid(
            path,
            Location::Line(1),
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

pub(crate) fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}
