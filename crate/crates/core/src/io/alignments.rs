use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{check_header, csv_error, csv_reader, csv_writer, finish_csv, read_text, write_atomic, IoError, Location};
use crate::gop::{PhoneInterval, UtteranceAlignment};
use crate::model::PhoneSet;

pub const ALIGNMENT_HEADER: [&str; 5] = ["utterance_id", "phone", "start_s", "end_s", "word_index"];

fn parse_time(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64, IoError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| {
            IoError::invalid(path, Location::Line(line), format!("{column}: invalid time `{raw}`"))
        })
}

/// Parses alignment CSV text. Intervals are grouped by utterance (sorted by
/// id) and ordered by start time; overlapping intervals are an error. When
/// `phones` is given, every non-silence symbol must belong to it.
pub fn parse_alignments(
    text: &str,
    path: &Path,
    phones: Option<&PhoneSet>,
    silence: &BTreeSet<String>,
) -> Result<Vec<UtteranceAlignment>, IoError> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &ALIGNMENT_HEADER)?;

    let mut grouped: BTreeMap<String, Vec<(u64, PhoneInterval)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(IoError::invalid(path, Location::Line(line), "empty utterance_id"));
        }
        let phone = record[1].to_string();
        if phone.is_empty() {
            return Err(IoError::invalid(path, Location::Line(line), "empty phone"));
        }
        if let Some(set) = phones {
            if !silence.contains(&phone) && set.index_of(&phone).is_none() {
                return Err(IoError::invalid(
                    path,
                    Location::Line(line),
                    format!("unknown phone symbol `{phone}`"),
                ));
            }
        }
        let start = parse_time(path, line, "start_s", &record[2])?;
        let end = parse_time(path, line, "end_s", &record[3])?;
        let mut interval = PhoneInterval::new(phone, start, end)
            .map_err(|e| IoError::invalid(path, Location::Line(line), e.to_string()))?;
        let word = record[4].trim();
        if !word.is_empty() {
            let index = word.parse::<usize>().map_err(|_| {
                IoError::invalid(path, Location::Line(line), format!("word_index: invalid `{word}`"))
            })?;
            interval = interval.with_word(index);
        }
        grouped.entry(id).or_default().push((line, interval));
    }

    grouped
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
            if let Some(w) = rows.windows(2).find(|w| w[1].1.start < w[0].1.end) {
                return Err(IoError::invalid(
                    path,
                    Location::Line(w[1].0),
                    format!(
                        "utterance `{id}`: interval {}-{} overlaps line {} ({}-{})",
                        w[1].1.start, w[1].1.end, w[0].0, w[0].1.start, w[0].1.end
                    ),
                ));
            }
            let intervals = rows.into_iter().map(|(_, iv)| iv).collect();
            UtteranceAlignment::new(id, intervals, silence.clone())
                .map_err(|e| IoError::invalid(path, Location::File, e.to_string()))
        })
        .collect()
}

pub fn read_alignments(
    path: &Path,
    phones: Option<&PhoneSet>,
    silence: &BTreeSet<String>,
) -> Result<Vec<UtteranceAlignment>, IoError> {
    parse_alignments(&read_text(path)?, path, phones, silence)
}

pub fn render_alignments(alignments: &[UtteranceAlignment]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(ALIGNMENT_HEADER).expect("in-memory write");
    for a in alignments {
        for iv in &a.intervals {
            let word = iv.word_index.map(|i| i.to_string()).unwrap_or_default();
            w.write_record([
                a.utterance_id.as_str(),
                iv.phone.as_str(),
                &iv.start.to_string(),
                &iv.end.to_string(),
                &word,
            ])
            .expect("in-memory write");
        }
    }
    finish_csv(w)
}

pub fn write_alignments(path: &Path, alignments: &[UtteranceAlignment]) -> Result<(), IoError> {
    write_atomic(path, &render_alignments(alignments))
}
