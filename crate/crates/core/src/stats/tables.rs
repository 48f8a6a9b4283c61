use serde::{Deserialize, Serialize};

use crate::model::{AnnotationRecord, Disfluency, OccurrenceCount, QualitativeLevel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelHistogram {
    pub level_1: usize,
    pub level_2: usize,
    pub level_3: usize,
}

impl LevelHistogram {
    fn add(&mut self, level: QualitativeLevel) {
        match level {
            QualitativeLevel::L1 => self.level_1 += 1,
            QualitativeLevel::L2 => self.level_2 += 1,
            // validated records never carry level 4
            QualitativeLevel::L3 | QualitativeLevel::L4 => self.level_3 += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.level_1 + self.level_2 + self.level_3
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub records: usize,
    pub phonetics: LevelHistogram,
    pub fluency: LevelHistogram,
    pub prosody: LevelHistogram,
}

pub fn score_distribution(records: &[AnnotationRecord]) -> ScoreDistribution {
    let mut out = ScoreDistribution {
        records: records.len(),
        ..Default::default()
    };
    for r in records {
        out.phonetics.add(r.phonetic_level);
        out.fluency.add(r.fluency.level);
        out.prosody.add(r.prosody.level);
    }
    out
}

/// Words carrying one SODA error type, with the share of all annotated words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SodaCount {
    pub category: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub category: String,
    pub none: usize,
    pub one: usize,
    pub multiple: usize,
}

impl CategoryCounts {
    fn new(category: &str) -> Self {
        Self {
            category: category.to_string(),
            none: 0,
            one: 0,
            multiple: 0,
        }
    }

    fn add(&mut self, count: OccurrenceCount) {
        match count {
            OccurrenceCount::None => self.none += 1,
            OccurrenceCount::One => self.one += 1,
            OccurrenceCount::Multiple => self.multiple += 1,
        }
    }
}

/// SODA totals plus per-category occurrence counts for fluency and prosody.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTables {
    pub records: usize,
    pub words: usize,
    pub soda: Vec<SodaCount>,
    pub fluency: Vec<CategoryCounts>,
    pub prosody: Vec<CategoryCounts>,
}

pub fn error_tables(records: &[AnnotationRecord]) -> ErrorTables {
    let mut soda = [0usize; 4];
    let mut words = 0;
    let mut fluency: Vec<CategoryCounts> = Disfluency::ALL
        .iter()
        .map(|d| CategoryCounts::new(d.as_str()))
        .collect();
    let mut prosody: Vec<CategoryCounts> = ["accent", "grouping", "modality"]
        .iter()
        .map(|c| CategoryCounts::new(c))
        .collect();

    for r in records {
        words += r.phonetic_words.len();
        for w in &r.phonetic_words {
            let f = w.soda;
            for (slot, flagged) in soda
                .iter_mut()
                .zip([f.substitution, f.omission, f.distortion, f.addition])
            {
                *slot += usize::from(flagged);
            }
        }
        for (row, d) in fluency.iter_mut().zip(Disfluency::ALL) {
            row.add(r.fluency.count(d));
        }
        for (row, (_, c)) in prosody.iter_mut().zip(r.prosody.categories()) {
            row.add(c);
        }
    }

    let soda = ["substitution", "omission", "distortion", "addition"]
        .iter()
        .zip(soda)
        .map(|(name, count)| SodaCount {
            category: name.to_string(),
            count,
            percent: if words == 0 {
                0.0
            } else {
                count as f64 * 100.0 / words as f64
            },
        })
        .collect();

    ErrorTables {
        records: records.len(),
        words,
        soda,
        fluency,
        prosody,
    }
}

/// Everything the statistics endpoint and the `stats` command report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub score_distribution: ScoreDistribution,
    pub error_tables: ErrorTables,
}

impl StatsReport {
    pub fn from_records(records: &[AnnotationRecord]) -> Self {
        Self {
            score_distribution: score_distribution(records),
            error_tables: error_tables(records),
        }
    }
}
