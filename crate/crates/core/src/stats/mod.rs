//! Rank correlation between GoP scores and rubric levels, plus the
//! descriptive corpus statistics (error tables, score distributions,
//! per-level GoP summaries).

mod correlate;
mod kendall;
mod summary;
mod tables;

use thiserror::Error;

pub use correlate::{
    correlate, select_for_protocol, utterance_levels, CorrelationReport, Protocol, ScoredUtterance,
};
pub use kendall::{kendall_tau_b, pair_counts, pair_counts_reference, PairCounts};
pub use summary::{group_summary, LevelSummary};
pub use tables::{
    error_tables, score_distribution, CategoryCounts, ErrorTables, LevelHistogram,
    ScoreDistribution, SodaCount, StatsReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("undefined correlation: all values tied")]
    UndefinedCorrelation,
    #[error("level {level} is not part of the {protocol} protocol")]
    LevelOutsideProtocol { level: u8, protocol: Protocol },
    #[error("the 4-level protocol needs at least one level-4 reference utterance")]
    MissingReferenceLevel,
}
