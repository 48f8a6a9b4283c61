//! Corpus tables from an annotation export.
//!
//! ```text
//! cargo run --example annotation_stats [annotations.json]
//! ```

use std::path::PathBuf;

use rubriclab::io::{read_annotations, render_stats_tables};
use rubriclab::stats::StatsReport;

fn main() {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rubric20/annotations.json")
    });
    let export = match read_annotations(&path) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let report = StatsReport::from_records(&export.records);
    println!("{} records, {} words", report.error_tables.records, report.error_tables.words);
    for (name, csv) in render_stats_tables(&report) {
        println!("\n== {name}");
        print!("{}", String::from_utf8(csv).unwrap());
    }
}
