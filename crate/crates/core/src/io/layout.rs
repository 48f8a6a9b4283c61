use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::container::{read_container, write_container, Container};
use super::{check_header, csv_error, csv_reader, csv_writer, finish_csv, read_text, write_atomic, IoError, Location};
use crate::classifier::{pool_by_layer, FrameEmbeddingSet, LayerFeatures};
use crate::gop::PosteriorMatrix;
use crate::matrix::RowMatrix;
use crate::model::PhoneSet;

/// Row-to-utterance index written next to pooled layer files.
pub const POOLED_INDEX: &str = "index.csv";

pub fn posterior_path(dir: &Path, utterance_id: &str) -> PathBuf {
    dir.join(format!("{utterance_id}.bin"))
}

pub fn embedding_path(dir: &Path, utterance_id: &str, layer: usize) -> PathBuf {
    dir.join(utterance_id).join(format!("layer-{layer}.bin"))
}

fn layer_of(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("layer-")?.strip_suffix(".bin")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Loads one posterior container. Column labels in the file define the
/// phone set; if `phones` is given the two must agree.
pub fn read_posteriors(
    path: &Path,
    utterance_id: &str,
    phones: Option<Arc<PhoneSet>>,
) -> Result<PosteriorMatrix, IoError> {
    let Container { header, matrix } = read_container(path)?;
    let phones = match (phones, header.labels.is_empty()) {
        (Some(set), true) => set,
        (Some(set), false) => {
            if set.symbols() != header.labels.as_slice() {
                return Err(IoError::invalid(
                    path,
                    Location::Byte(0),
                    "column labels differ from the phone set",
                ));
            }
            set
        }
        (None, false) => Arc::new(
            PhoneSet::new(header.labels.iter().cloned())
                .map_err(|e| IoError::invalid(path, Location::Byte(0), format!("labels: {e}")))?,
        ),
        (None, true) => {
            return Err(IoError::invalid(
                path,
                Location::Byte(0),
                "no column labels and no phone set given",
            ))
        }
    };
    PosteriorMatrix::new(utterance_id, phones, header.frame_shift_ms, matrix)
        .map_err(|e| IoError::invalid(path, Location::File, e.to_string()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>, IoError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| IoError::io(dir, e))? {
        let entry = entry.map_err(|e| IoError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Reads `<dir>/<utterance>/layer-<k>.bin` for every utterance directory.
pub fn read_embedding_dir(dir: &Path) -> Result<Vec<FrameEmbeddingSet>, IoError> {
    let mut sets = Vec::new();
    for (utterance, path) in sorted_entries(dir)? {
        if !path.is_dir() {
            return Err(IoError::invalid(
                &path,
                Location::File,
                "expected one directory per utterance",
            ));
        }
        for (name, file) in sorted_entries(&path)? {
            let layer = layer_of(&name).ok_or_else(|| {
                IoError::invalid(&file, Location::File, "expected a file named layer-<k>.bin")
            })?;
            let c = read_container(&file)?;
            let set = FrameEmbeddingSet::new(utterance.clone(), layer, c.matrix, c.header.frame_shift_ms)
                .map_err(|e| IoError::invalid(&file, Location::File, e.to_string()))?;
            sets.push(set);
        }
    }
    Ok(sets)
}

/// Utterance-level features for every layer, rows in `ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledLayers {
    pub ids: Vec<String>,
    pub frame_shift_ms: f64,
    pub layers: BTreeMap<usize, RowMatrix>,
}

impl PooledLayers {
    pub fn from_sets(sets: &[FrameEmbeddingSet]) -> Result<Self, crate::classifier::ClassifierError> {
        let frame_shift_ms = sets.first().map_or(20.0, |s| s.frame_shift_ms);
        let pooled = pool_by_layer(sets)?;
        let ids = pooled.values().next().map(|(ids, _)| ids.clone()).unwrap_or_default();
        let layers = pooled.into_iter().map(|(k, (_, m))| (k, m)).collect();
        Ok(Self {
            ids,
            frame_shift_ms,
            layers,
        })
    }

    /// Features for the utterances in `order`, which must all be present.
    pub fn select(&self, order: &[String]) -> Result<Vec<LayerFeatures>, String> {
        let position: BTreeMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows = order
            .iter()
            .map(|id| {
                position
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| format!("no embeddings for utterance `{id}`"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .layers
            .iter()
            .map(|(&k, m)| LayerFeatures::new(k, m.select_rows(&rows)))
            .collect())
    }
}

/// Writes `<dir>/layer-<k>.bin` per layer plus the row index.
pub fn write_pooled(dir: &Path, pooled: &PooledLayers) -> Result<(), IoError> {
    for (layer, m) in &pooled.layers {
        let path = dir.join(format!("layer-{layer}.bin"));
        write_container(&path, &Container::new(m.clone(), pooled.frame_shift_ms, Vec::new()))?;
    }
    let mut w = csv_writer();
    w.write_record(["row", "utterance_id"]).expect("in-memory write");
    for (i, id) in pooled.ids.iter().enumerate() {
        w.write_record([i.to_string(), id.clone()]).expect("in-memory write");
    }
    write_atomic(&dir.join(POOLED_INDEX), &finish_csv(w))
}

fn read_pooled(dir: &Path) -> Result<PooledLayers, IoError> {
    let index = dir.join(POOLED_INDEX);
    let text = read_text(&index)?;
    let mut reader = csv_reader(&text);
    let header = reader.headers().map_err(|e| csv_error(&index, e))?.clone();
    check_header(&index, &header, &["row", "utterance_id"])?;
    let mut ids = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(&index, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row[0].parse::<usize>().ok() != Some(ids.len()) {
            return Err(IoError::invalid(
                &index,
                Location::Line(line),
                format!("expected row {}, found `{}`", ids.len(), &row[0]),
            ));
        }
        ids.push(row[1].to_string());
    }

    let mut layers = BTreeMap::new();
    let mut frame_shift_ms = 20.0;
    for (name, path) in sorted_entries(dir)? {
        if name == POOLED_INDEX {
            continue;
        }
        let layer = layer_of(&name).ok_or_else(|| {
            IoError::invalid(&path, Location::File, "expected a file named layer-<k>.bin")
        })?;
        let c = read_container(&path)?;
        if c.matrix.rows() != ids.len() {
            return Err(IoError::invalid(
                &path,
                Location::Byte(0),
                format!("{} rows but the index lists {} utterances", c.matrix.rows(), ids.len()),
            ));
        }
        frame_shift_ms = c.header.frame_shift_ms;
        layers.insert(layer, c.matrix);
    }
    Ok(PooledLayers {
        ids,
        frame_shift_ms,
        layers,
    })
}

/// Loads pooled features from `dir`: either a pooled directory (with
/// `index.csv`) or a raw per-utterance directory, pooled on the fly.
pub fn load_pooled_layers(dir: &Path) -> Result<PooledLayers, IoError> {
    if dir.join(POOLED_INDEX).is_file() {
        return read_pooled(dir);
    }
    let sets = read_embedding_dir(dir)?;
    PooledLayers::from_sets(&sets).map_err(|e| IoError::invalid(dir, Location::File, e.to_string()))
}
