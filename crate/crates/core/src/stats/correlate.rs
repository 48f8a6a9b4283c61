use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{kendall_tau_b, StatsError};
use crate::gop::GopVariant;
use crate::model::{AnnotationRecord, QualitativeLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub utterance_id: String,
    pub gop: f64,
    pub level: QualitativeLevel,
}

/// Which level scale the correlation runs on. The four-level protocol adds
/// typically-developing reference utterances at level 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "3level")]
    ThreeLevel,
    #[serde(rename = "4level")]
    FourLevel,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ThreeLevel => "3level",
            Self::FourLevel => "4level",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub variant: GopVariant,
    pub protocol: Protocol,
    pub tau: f64,
    pub n: usize,
}

/// Rows a protocol correlates over: levels 1 to 3 for `3level`, everything
/// for `4level`.
pub fn select_for_protocol(scored: &[ScoredUtterance], protocol: Protocol) -> Vec<ScoredUtterance> {
    scored
        .iter()
        .filter(|s| protocol == Protocol::FourLevel || s.level != QualitativeLevel::L4)
        .cloned()
        .collect()
}

/// Rubric level per utterance for correlation: the phonetic level of the
/// record with the smallest evaluator id, and level 4 for every id in
/// `reference_ids` (typically-developing speakers).
pub fn utterance_levels<'a>(
    records: &[AnnotationRecord],
    reference_ids: impl IntoIterator<Item = &'a str>,
) -> BTreeMap<String, QualitativeLevel> {
    let mut first: BTreeMap<&str, &AnnotationRecord> = BTreeMap::new();
    for r in records {
        first
            .entry(r.utterance_id.as_str())
            .and_modify(|cur| {
                if r.evaluator_id < cur.evaluator_id {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    let mut levels: BTreeMap<String, QualitativeLevel> = first
        .into_iter()
        .map(|(id, r)| (id.to_string(), r.phonetic_level))
        .collect();
    for id in reference_ids {
        levels.insert(id.to_string(), QualitativeLevel::L4);
    }
    levels
}

/// Kendall tau-b between utterance GoP and numeric rubric level.
pub fn correlate(
    scored: &[ScoredUtterance],
    protocol: Protocol,
    variant: GopVariant,
) -> Result<CorrelationReport, StatsError> {
    match protocol {
        Protocol::ThreeLevel => {
            if scored.iter().any(|s| s.level == QualitativeLevel::L4) {
                return Err(StatsError::LevelOutsideProtocol { level: 4, protocol });
            }
        }
        Protocol::FourLevel => {
            if !scored.iter().any(|s| s.level == QualitativeLevel::L4) {
                return Err(StatsError::MissingReferenceLevel);
            }
        }
    }
    let gop: Vec<f64> = scored.iter().map(|s| s.gop).collect();
    let levels: Vec<f64> = scored.iter().map(|s| f64::from(s.level.value())).collect();
    let tau = kendall_tau_b(&gop, &levels)?;
    Ok(CorrelationReport {
        variant,
        protocol,
        tau,
        n: scored.len(),
    })
}
