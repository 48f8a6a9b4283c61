use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{check_header, csv_error, csv_reader, csv_writer, finish_csv, read_text, write_atomic, IoError, Location};
use crate::model::{
    AnnotationRecord, FluencyAnnotation, GlobalObservations, OccurrenceCount, PhoneticWord,
    ProsodyAnnotation, QualitativeLevel, SodaFlags,
};
use crate::stats::StatsReport;

/// Annotation dump: the records plus the aggregate counts derived from
/// them, so a file can be audited without recomputation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationExport {
    pub records: Vec<AnnotationRecord>,
    pub summary: StatsReport,
}

impl AnnotationExport {
    pub fn new(records: Vec<AnnotationRecord>) -> Self {
        let summary = StatsReport::from_records(&records);
        Self { records, summary }
    }
}

// The summary is optional on input; when present it must agree with the
// records.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExport {
    records: Vec<AnnotationRecord>,
    #[serde(default)]
    summary: Option<StatsReport>,
}

fn validate_all(path: &Path, records: &[AnnotationRecord], line_of: impl Fn(usize) -> Location) -> Result<(), IoError> {
    for (i, r) in records.iter().enumerate() {
        if let Err(errs) = r.validate() {
            let first = &errs.0[0];
            let at = match line_of(i) {
                Location::Field(prefix) => Location::Field(format!("{prefix}.{}", first.path)),
                other => other,
            };
            let detail: Vec<String> = errs.0.iter().map(ToString::to_string).collect();
            return Err(IoError::invalid(path, at, detail.join("; ")));
        }
    }
    Ok(())
}

pub fn parse_annotations_json(text: &str, path: &Path) -> Result<AnnotationExport, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawExport = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        IoError::invalid(path, Location::Field(field), e.into_inner().to_string())
    })?;
    validate_all(path, &raw.records, |i| Location::Field(format!("records[{i}]")))?;
    let export = AnnotationExport::new(raw.records);
    if let Some(summary) = raw.summary {
        if summary != export.summary {
            return Err(IoError::invalid(
                path,
                Location::Field("summary".into()),
                "summary does not match the records",
            ));
        }
    }
    Ok(export)
}

pub fn read_annotations(path: &Path) -> Result<AnnotationExport, IoError> {
    parse_annotations_json(&read_text(path)?, path)
}

pub fn render_annotations_json(records: &[AnnotationRecord]) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&AnnotationExport::new(records.to_vec()))
        .expect("annotation export serializes");
    out.push(b'\n');
    out
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<(), IoError> {
    write_atomic(path, &render_annotations_json(records))
}

pub const ANNOTATION_CSV_HEADER: [&str; 20] = [
    "utterance_id",
    "evaluator_id",
    "revision",
    "timestamp",
    "phonetic_words",
    "phonetic_level",
    "phonetic_observations",
    "blocks",
    "prolongations",
    "sound_repetitions",
    "word_repetitions",
    "interjections",
    "fluency_level",
    "accent",
    "grouping",
    "modality",
    "prosody_level",
    "atypical_pitch",
    "atypical_volume",
    "free_text",
];

const SODA_LETTERS: [char; 4] = ['S', 'O', 'D', 'A'];

/// `0:-;1:S;2:OD`: word index, then the set SODA letters or `-`.
fn encode_words(words: &[PhoneticWord]) -> String {
    words
        .iter()
        .map(|w| {
            let s = w.soda;
            let flags: String = SODA_LETTERS
                .iter()
                .zip([s.substitution, s.omission, s.distortion, s.addition])
                .filter(|(_, set)| *set)
                .map(|(c, _)| *c)
                .collect();
            let flags = if flags.is_empty() { "-".to_string() } else { flags };
            format!("{}:{flags}", w.word_index)
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_words(raw: &str) -> Result<Vec<PhoneticWord>, String> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(';')
        .map(|item| {
            let (index, flags) = item
                .split_once(':')
                .ok_or_else(|| format!("phonetic_words: `{item}` is not index:flags"))?;
            let word_index = index
                .parse()
                .map_err(|_| format!("phonetic_words: invalid word index `{index}`"))?;
            let mut soda = SodaFlags::default();
            if flags != "-" {
                if flags.is_empty() {
                    return Err(format!("phonetic_words: no flags for word {index}"));
                }
                for c in flags.chars() {
                    let slot = match c {
                        'S' => &mut soda.substitution,
                        'O' => &mut soda.omission,
                        'D' => &mut soda.distortion,
                        'A' => &mut soda.addition,
                        other => return Err(format!("phonetic_words: unknown flag `{other}`")),
                    };
                    if *slot {
                        return Err(format!("phonetic_words: flag `{c}` repeated"));
                    }
                    *slot = true;
                }
            }
            Ok(PhoneticWord { word_index, soda })
        })
        .collect()
}

fn timestamp_text(ts: &DateTime<Utc>) -> String {
    match serde_json::to_value(ts).expect("timestamp serializes") {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

pub fn render_annotations_csv(records: &[AnnotationRecord]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(ANNOTATION_CSV_HEADER).expect("in-memory write");
    for r in records {
        let f = &r.fluency;
        let p = &r.prosody;
        let level = |l: QualitativeLevel| l.value().to_string();
        let row: [String; 20] = [
            r.utterance_id.clone(),
            r.evaluator_id.clone(),
            r.revision.to_string(),
            timestamp_text(&r.timestamp),
            encode_words(&r.phonetic_words),
            level(r.phonetic_level),
            r.phonetic_observations.clone().unwrap_or_default(),
            f.blocks.to_string(),
            f.prolongations.to_string(),
            f.sound_repetitions.to_string(),
            f.word_repetitions.to_string(),
            f.interjections.to_string(),
            level(f.level),
            p.accent.to_string(),
            p.grouping.to_string(),
            p.modality.to_string(),
            level(p.level),
            r.global.atypical_pitch.to_string(),
            r.global.atypical_volume.to_string(),
            r.global.free_text.clone().unwrap_or_default(),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    finish_csv(w)
}

pub fn write_annotations_csv(path: &Path, records: &[AnnotationRecord]) -> Result<(), IoError> {
    write_atomic(path, &render_annotations_csv(records))
}

fn parse_row(row: &csv::StringRecord) -> Result<AnnotationRecord, String> {
    let col = |name: &str| {
        let i = ANNOTATION_CSV_HEADER.iter().position(|h| *h == name).expect("known column");
        &row[i]
    };
    let count = |name: &str| -> Result<OccurrenceCount, String> {
        col(name).parse().map_err(|e| format!("{name}: {e}"))
    };
    let level = |name: &str| -> Result<QualitativeLevel, String> {
        let raw = col(name);
        let v: i64 = raw.parse().map_err(|_| format!("{name}: invalid level `{raw}`"))?;
        QualitativeLevel::from_value(v).map_err(|e| format!("{name}: {e}"))
    };
    let flag = |name: &str| -> Result<bool, String> {
        match col(name) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(format!("{name}: expected true or false, got `{other}`")),
        }
    };
    let optional = |name: &str| Some(col(name).to_string()).filter(|s| !s.is_empty());

    Ok(AnnotationRecord {
        utterance_id: col("utterance_id").to_string(),
        evaluator_id: col("evaluator_id").to_string(),
        revision: col("revision")
            .parse()
            .map_err(|_| format!("revision: invalid `{}`", col("revision")))?,
        timestamp: DateTime::parse_from_rfc3339(col("timestamp"))
            .map_err(|e| format!("timestamp: {e}"))?
            .with_timezone(&Utc),
        phonetic_words: decode_words(col("phonetic_words"))?,
        phonetic_level: level("phonetic_level")?,
        phonetic_observations: optional("phonetic_observations"),
        fluency: FluencyAnnotation {
            blocks: count("blocks")?,
            prolongations: count("prolongations")?,
            sound_repetitions: count("sound_repetitions")?,
            word_repetitions: count("word_repetitions")?,
            interjections: count("interjections")?,
            level: level("fluency_level")?,
        },
        prosody: ProsodyAnnotation {
            accent: count("accent")?,
            grouping: count("grouping")?,
            modality: count("modality")?,
            level: level("prosody_level")?,
        },
        global: GlobalObservations {
            atypical_pitch: flag("atypical_pitch")?,
            atypical_volume: flag("atypical_volume")?,
            free_text: optional("free_text"),
        },
    })
}

pub fn parse_annotations_csv(text: &str, path: &Path) -> Result<Vec<AnnotationRecord>, IoError> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &ANNOTATION_CSV_HEADER)?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let record = parse_row(&row).map_err(|m| IoError::invalid(path, Location::Line(line), m))?;
        records.push(record);
        lines.push(line);
    }
    validate_all(path, &records, |i| Location::Line(lines[i]))?;
    Ok(records)
}

pub fn read_annotations_csv(path: &Path) -> Result<Vec<AnnotationRecord>, IoError> {
    parse_annotations_csv(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::clean_record;

    fn p() -> &'static Path {
        Path::new("ann.json")
    }

    fn records() -> Vec<AnnotationRecord> {
        let mut a = clean_record(3);
        a.phonetic_words[1].soda.substitution = true;
        a.phonetic_words[2].soda = SodaFlags {
            omission: true,
            distortion: true,
            ..Default::default()
        };
        a.phonetic_level = QualitativeLevel::L1;
        a.fluency.blocks = OccurrenceCount::Multiple;
        a.global.free_text = Some("hoarse, \"shrill\"\nat end".into());
        a.phonetic_observations = Some("x".into());
        let mut b = clean_record(2);
        b.utterance_id = "u2".into();
        b.phonetic_words.reverse();
        vec![a, b]
    }

    #[test]
    fn json_round_trip_is_fixpoint() {
        let bytes = render_annotations_json(&records());
        let back = parse_annotations_json(std::str::from_utf8(&bytes).unwrap(), p()).unwrap();
        assert_eq!(back.records, records());
        assert_eq!(render_annotations_json(&back.records), bytes);
        assert_eq!(back.summary.error_tables.words, 5);
        assert_eq!(back.summary.error_tables.soda[0].count, 1);
    }

    #[test]
    fn empty_document() {
        let bytes = render_annotations_json(&[]);
        let back = parse_annotations_json(std::str::from_utf8(&bytes).unwrap(), p()).unwrap();
        assert!(back.records.is_empty());
        assert!(parse_annotations_json(r#"{"records":[]}"#, p()).is_ok());
    }

    #[test]
    fn missing_category_is_named() {
        let mut v = serde_json::to_value(AnnotationExport::new(records())).unwrap();
        v["records"][1]["fluency"].as_object_mut().unwrap().remove("prolongations");
        let err = parse_annotations_json(&v.to_string(), p()).unwrap_err().to_string();
        assert!(err.contains("records[1].fluency"), "{err}");
        assert!(err.contains("prolongations"), "{err}");
    }

    #[test]
    fn invalid_values_are_located() {
        let mut v = serde_json::to_value(AnnotationExport::new(records())).unwrap();
        v["records"][0]["prosody"]["accent"] = "sometimes".into();
        let err = parse_annotations_json(&v.to_string(), p()).unwrap_err().to_string();
        assert!(err.contains("records[0].prosody.accent"), "{err}");

        let mut bad = records();
        bad[1].phonetic_words[0].word_index = 7;
        let text = serde_json::json!({ "records": bad }).to_string();
        let err = parse_annotations_json(&text, p()).unwrap_err().to_string();
        assert!(err.contains("records[1].phonetic_words[0].word_index"), "{err}");
    }

    #[test]
    fn stale_summary_rejected() {
        let mut v = serde_json::to_value(AnnotationExport::new(records())).unwrap();
        v["summary"]["error_tables"]["words"] = 99.into();
        let err = parse_annotations_json(&v.to_string(), p()).unwrap_err().to_string();
        assert!(err.contains("summary"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let bytes = render_annotations_csv(&records());
        let text = std::str::from_utf8(&bytes).unwrap();
        assert_eq!(text.lines().next().unwrap(), ANNOTATION_CSV_HEADER.join(","));
        let back = parse_annotations_csv(text, Path::new("a.csv")).unwrap();
        assert_eq!(back, records());
        assert_eq!(render_annotations_csv(&back), bytes);
        assert!(text.contains("0:-;1:S;2:OD"));
    }

    #[test]
    fn csv_row_count() {
        let bytes = render_annotations_csv(&records());
        let mut r = csv_reader(std::str::from_utf8(&bytes).unwrap());
        assert_eq!(r.records().count(), 2);
        let empty = render_annotations_csv(&[]);
        assert_eq!(parse_annotations_csv(std::str::from_utf8(&empty).unwrap(), p()).unwrap(), vec![]);
    }

    #[test]
    fn word_codec_errors() {
        assert!(decode_words("0:X").is_err());
        assert!(decode_words("0:SS").is_err());
        assert!(decode_words("0").is_err());
        assert!(decode_words("a:S").is_err());
        assert!(decode_words("0:").is_err());
    }

    #[test]
    fn csv_errors_have_lines() {
        let bytes = render_annotations_csv(&records());
        let text = String::from_utf8(bytes).unwrap().replace(",multiple,", ",lots,");
        let err = parse_annotations_csv(&text, Path::new("a.csv")).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("blocks"), "{err}");
    }
}
