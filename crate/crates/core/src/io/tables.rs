use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{check_header, csv_error, csv_reader, csv_writer, finish_csv, read_text, write_atomic, IoError, Location};
use crate::classifier::{EvalReport, GridSearchResult};
use crate::gop::GopVariant;
use crate::model::{Disfluency, OccurrenceCount, QualitativeLevel};
use crate::stats::{LevelHistogram, LevelSummary, ScoredUtterance, StatsReport};

pub const SCORE_HEADER: [&str; 6] = [
    "utterance_id",
    "variant",
    "gop",
    "phones_scored",
    "phones_skipped",
    "level",
];

/// One line of the `gop score` output. `level` is empty when no rubric
/// level is known for the utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub utterance_id: String,
    pub variant: GopVariant,
    pub gop: f64,
    pub phones_scored: usize,
    pub phones_skipped: usize,
    pub level: Option<QualitativeLevel>,
}

pub fn render_score_rows(rows: &[ScoreRow]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(SCORE_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.utterance_id.clone(),
            r.variant.to_string(),
            r.gop.to_string(),
            r.phones_scored.to_string(),
            r.phones_skipped.to_string(),
            r.level.map(|l| l.value().to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

pub fn write_score_rows(path: &Path, rows: &[ScoreRow]) -> Result<(), IoError> {
    write_atomic(path, &render_score_rows(rows))
}

/// Reads `utterance_id, gop, level` from a CSV that has at least those
/// columns (in any position). Every row needs a level.
pub fn read_scored(path: &Path) -> Result<Vec<ScoredUtterance>, IoError> {
    let text = read_text(path)?;
    let mut reader = csv_reader(&text);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| {
            IoError::invalid(path, Location::Line(1), format!("missing column `{name}`"))
        })
    };
    let (id_col, gop_col, level_col) = (column("utterance_id")?, column("gop")?, column("level")?);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |m: String| IoError::invalid(path, Location::Line(line), m);
        let id = row[id_col].to_string();
        if id.is_empty() {
            return Err(bad("empty utterance_id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(bad(format!("duplicate utterance `{id}`")));
        }
        let gop: f64 = row[gop_col]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(format!("gop: invalid value `{}`", &row[gop_col])))?;
        let raw_level = &row[level_col];
        if raw_level.is_empty() {
            return Err(bad(format!("utterance `{id}` has no level")));
        }
        let level = raw_level
            .parse::<i64>()
            .map_err(|_| bad(format!("level: invalid value `{raw_level}`")))
            .and_then(|v| QualitativeLevel::from_value(v).map_err(|e| bad(e.to_string())))?;
        out.push(ScoredUtterance {
            utterance_id: id,
            gop,
            level,
        });
    }
    Ok(out)
}

/// Occurrence counts per disfluency and utterance.
pub type LabelTable = BTreeMap<Disfluency, BTreeMap<String, OccurrenceCount>>;

const LABEL_HEADER: [&str; 3] = ["utterance_id", "disfluency", "count"];

pub fn read_labels(path: &Path) -> Result<LabelTable, IoError> {
    let text = read_text(path)?;
    let mut reader = csv_reader(&text);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &LABEL_HEADER)?;
    let mut table = LabelTable::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |m: String| IoError::invalid(path, Location::Line(line), m);
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(bad("empty utterance_id".into()));
        }
        let disfluency: Disfluency = row[1].parse().map_err(|e| bad(format!("disfluency: {e}")))?;
        let count: OccurrenceCount = row[2].parse().map_err(|e| bad(format!("count: {e}")))?;
        if table.entry(disfluency).or_default().insert(id.clone(), count).is_some() {
            return Err(bad(format!("duplicate label for `{id}` / {disfluency}")));
        }
    }
    Ok(table)
}

pub fn render_labels(table: &LabelTable) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(LABEL_HEADER).expect("in-memory write");
    for (d, rows) in table {
        for (id, count) in rows {
            w.write_record([id.as_str(), d.as_str(), count.as_str()])
                .expect("in-memory write");
        }
    }
    finish_csv(w)
}

pub fn write_labels(path: &Path, table: &LabelTable) -> Result<(), IoError> {
    write_atomic(path, &render_labels(table))
}

/// File names of the CSV tables written by [`render_stats_tables`].
pub const STATS_TABLE_FILES: [&str; 4] = [
    "table1_soda.csv",
    "table2_fluency.csv",
    "table3_prosody.csv",
    "score_distribution.csv",
];

/// The statistics report as CSV tables keyed by file name. Percentages
/// carry one decimal.
pub fn render_stats_tables(report: &StatsReport) -> Vec<(&'static str, Vec<u8>)> {
    let t = &report.error_tables;

    let mut soda = csv_writer();
    soda.write_record(["category", "count", "percent"]).expect("in-memory write");
    for row in &t.soda {
        soda.write_record([row.category.clone(), row.count.to_string(), format!("{:.1}", row.percent)])
            .expect("in-memory write");
    }
    soda.write_record(["words".to_string(), t.words.to_string(), String::new()])
        .expect("in-memory write");

    let counts = |rows: &[crate::stats::CategoryCounts]| {
        let mut w = csv_writer();
        w.write_record(["category", "none", "one", "multiple"]).expect("in-memory write");
        for r in rows {
            w.write_record([
                r.category.clone(),
                r.none.to_string(),
                r.one.to_string(),
                r.multiple.to_string(),
            ])
            .expect("in-memory write");
        }
        finish_csv(w)
    };

    let d = &report.score_distribution;
    let mut dist = csv_writer();
    dist.write_record(["dimension", "level_1", "level_2", "level_3"]).expect("in-memory write");
    let hist_row = |name: &str, h: &LevelHistogram| {
        [name.to_string(), h.level_1.to_string(), h.level_2.to_string(), h.level_3.to_string()]
    };
    for (name, h) in [("phonetics", &d.phonetics), ("fluency", &d.fluency), ("prosody", &d.prosody)] {
        dist.write_record(hist_row(name, h)).expect("in-memory write");
    }

    vec![
        (STATS_TABLE_FILES[0], finish_csv(soda)),
        (STATS_TABLE_FILES[1], counts(&t.fluency)),
        (STATS_TABLE_FILES[2], counts(&t.prosody)),
        (STATS_TABLE_FILES[3], finish_csv(dist)),
    ]
}

/// Box-plot statistics, one row per level.
pub fn render_summary_csv(summary: &[LevelSummary]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(["level", "n", "mean", "min", "q1", "median", "q3", "max"])
        .expect("in-memory write");
    for s in summary {
        w.write_record([
            s.level.value().to_string(),
            s.n.to_string(),
            s.mean.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

/// Every grid cell of one or more searches; `fold_f1` is `;`-separated.
pub fn render_grid_csv(results: &[GridSearchResult]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record([
        "disfluency",
        "layer",
        "gamma_index",
        "c_index",
        "gamma",
        "c",
        "mean_f1",
        "fold_f1",
        "best",
    ])
    .expect("in-memory write");
    for r in results {
        let best = r.best_cell();
        for cell in &r.cells {
            let folds: Vec<String> = cell.fold_f1.iter().map(f64::to_string).collect();
            let is_best = best.is_some_and(|b| std::ptr::eq(b, cell));
            w.write_record([
                r.disfluency.to_string(),
                cell.layer.to_string(),
                cell.gamma_index.to_string(),
                cell.c_index.to_string(),
                cell.gamma.to_string(),
                cell.c.to_string(),
                cell.mean_f1.to_string(),
                folds.join(";"),
                is_best.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    finish_csv(w)
}

/// Cross-corpus results with one row per disfluency, F1 for detection and
/// non-detection.
pub fn render_eval_csv(report: &EvalReport) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record([
        "disfluency",
        "layer",
        "cv_f1",
        "f1_id",
        "f1_nid",
        "support_id",
        "support_nid",
    ])
    .expect("in-memory write");
    for r in &report.rows {
        w.write_record([
            r.disfluency.to_string(),
            r.layer.to_string(),
            r.cv_f1.to_string(),
            r.f1_id.to_string(),
            r.f1_nid.to_string(),
            r.support_id.to_string(),
            r.support_nid.to_string(),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::clean_record;

    fn tmp(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn score_rows_feed_correlation_input() {
        let rows = vec![
            ScoreRow {
                utterance_id: "a".into(),
                variant: GopVariant::Gmm,
                gop: -0.1234567890123,
                phones_scored: 3,
                phones_skipped: 1,
                level: Some(QualitativeLevel::L2),
            },
            ScoreRow {
                utterance_id: "b".into(),
                variant: GopVariant::Gmm,
                gop: -2.5,
                phones_scored: 1,
                phones_skipped: 0,
                level: Some(QualitativeLevel::L4),
            },
        ];
        let (_d, path) = tmp(std::str::from_utf8(&render_score_rows(&rows)).unwrap());
        let scored = read_scored(&path).unwrap();
        assert_eq!(scored[0].gop, -0.1234567890123);
        assert_eq!(scored[1].level, QualitativeLevel::L4);
    }

    #[test]
    fn minimal_scored_file() {
        let (_d, path) = tmp("level,gop,utterance_id\n3,0.5,x\n");
        assert_eq!(read_scored(&path).unwrap()[0].utterance_id, "x");
        let (_d, path) = tmp("utterance_id,gop,level\nx,0.5,\n");
        assert!(read_scored(&path).unwrap_err().to_string().contains("no level"));
        let (_d, path) = tmp("utterance_id,gop,level\nx,nan,1\n");
        assert!(read_scored(&path).unwrap_err().to_string().contains("line 2"));
        let (_d, path) = tmp("utterance_id,gop,level\nx,1,1\nx,2,2\n");
        assert!(read_scored(&path).unwrap_err().to_string().contains("duplicate"));
        let (_d, path) = tmp("utterance_id,gop\nx,1\n");
        assert!(read_scored(&path).unwrap_err().to_string().contains("`level`"));
    }

    #[test]
    fn labels_round_trip() {
        let (_d, path) = tmp("utterance_id,disfluency,count\nu1,blocks,one\nu2,blocks,none\nu1,interjections,multiple\n");
        let t = read_labels(&path).unwrap();
        assert_eq!(t[&Disfluency::Blocks]["u1"], OccurrenceCount::One);
        let (_d2, again) = tmp(std::str::from_utf8(&render_labels(&t)).unwrap());
        assert_eq!(read_labels(&again).unwrap(), t);

        let (_d, path) = tmp("utterance_id,disfluency,count\nu1,stutter,one\n");
        assert!(read_labels(&path).unwrap_err().to_string().contains("stutter"));
        let (_d, path) = tmp("utterance_id,disfluency,count\nu1,blocks,one\nu1,blocks,none\n");
        assert!(read_labels(&path).unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn stats_tables_layout() {
        let mut r = clean_record(4);
        r.phonetic_words[0].soda.omission = true;
        r.fluency.blocks = OccurrenceCount::One;
        let tables = render_stats_tables(&StatsReport::from_records(&[r]));
        let text = |i: usize| String::from_utf8(tables[i].1.clone()).unwrap();
        assert_eq!(
            text(0),
            "category,count,percent\nsubstitution,0,0.0\nomission,1,25.0\ndistortion,0,0.0\naddition,0,0.0\nwords,4,\n"
        );
        assert!(text(1).starts_with("category,none,one,multiple\nblocks,0,1,0\n"));
        assert!(text(2).contains("modality,1,0,0"));
        assert_eq!(
            text(3),
            "dimension,level_1,level_2,level_3\nphonetics,0,0,1\nfluency,0,0,1\nprosody,0,0,1\n"
        );
    }
}
