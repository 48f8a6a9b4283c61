//! Correlates utterance scores with rubric levels under both protocols and
//! prints per-level summaries.
//!
//! ```text
//! cargo run --example kendall_correlation
//! ```

use rubriclab::gop::GopVariant;
use rubriclab::model::QualitativeLevel;
use rubriclab::stats::{
    correlate, group_summary, pair_counts, select_for_protocol, Protocol, ScoredUtterance,
};

fn main() {
    let data = [
        (-2.9, 1), (-2.1, 1), (-1.7, 1), (-2.2, 2), (-1.1, 2), (-1.3, 2),
        (-0.9, 3), (-1.2, 3), (-0.4, 3), (-0.3, 4), (-0.2, 4), (-0.6, 4),
    ];
    let scored: Vec<ScoredUtterance> = data
        .iter()
        .enumerate()
        .map(|(i, &(gop, level))| ScoredUtterance {
            utterance_id: format!("u{i:02}"),
            gop,
            level: QualitativeLevel::from_value(level).unwrap(),
        })
        .collect();

    // level 4 marks typically-developing reference speakers, which only the
    // four-level protocol includes
    for protocol in [Protocol::ThreeLevel, Protocol::FourLevel] {
        let selected = select_for_protocol(&scored, protocol);
        let report = correlate(&selected, protocol, GopVariant::Gmm).unwrap();
        println!("{}: tau-b {:.4} over {} utterances", protocol.as_str(), report.tau, report.n);
    }

    let x: Vec<f64> = scored.iter().map(|s| s.gop).collect();
    let y: Vec<f64> = scored.iter().map(|s| f64::from(s.level.value())).collect();
    println!("{:?}", pair_counts(&x, &y).unwrap());

    for s in group_summary(&scored) {
        println!(
            "level {}: n={} mean {:.3} median {:.3} [{:.2}, {:.2}]",
            s.level, s.n, s.mean, s.median, s.min, s.max
        );
    }
}
