//! Shared helpers for the integration tests: reference implementations used
//! as oracles, constructed corpora and a CLI runner.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rubriclab::classifier::LayerFeatures;
use rubriclab::cli::{run_with, CommandOutcome};
use rubriclab::gop::{PhoneInterval, UtteranceAlignment};
use rubriclab::io::{posterior_path, write_alignments, write_annotations, write_container, Container};
use rubriclab::model::{
    AnnotationRecord, FluencyAnnotation, GlobalObservations, OccurrenceCount, PhoneticWord,
    ProsodyAnnotation, QualitativeLevel, SodaFlags,
};
use rubriclab::RowMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rubric20")
}

pub fn schema_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/annotation-record.schema.json")
}

/// Runs the CLI in-process, capturing stdout and stderr.
pub fn cli(args: &[&str]) -> (CommandOutcome, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rubriclab").chain(args.iter().copied());
    let outcome = run_with(argv, &mut out, &mut err);
    (
        outcome,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

// ---------------------------------------------------------------------------
// Kendall tau-b by enumerating every pair.

/// `None` when either vector is constant.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut concordant, mut discordant, mut only_x, mut only_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                only_x += 1;
            } else if dy == 0.0 {
                only_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let untied_x = (concordant + discordant + only_y) as f64;
    let untied_y = (concordant + discordant + only_x) as f64;
    if untied_x == 0.0 || untied_y == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / (untied_x * untied_y).sqrt())
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for small symmetric matrices.

/// Eigenvalues in decreasing order with unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (m[j][j], v.iter().map(|row| row[j]).collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pairs
}

/// Sample covariance with the n - 1 divisor.
pub fn covariance(x: &RowMatrix) -> Vec<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    (0..n)
                        .map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b]))
                        .sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// SVM dual solved by enumerating active sets.

pub fn rbf_gram(x: &RowMatrix, gamma: f64) -> Vec<Vec<f64>> {
    let n = x.rows();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
                    (-gamma * d).exp()
                })
                .collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Optimal `(alpha, bias)` of the soft-margin dual with box `[0, c]`.
///
/// Each sample is assigned to "zero", "free" or "at bound"; the free block is
/// solved from the margin equations plus the equality constraint, and the
/// first assignment satisfying every KKT condition is returned. When no
/// sample is free the bias is only bounded by the KKT conditions and the
/// midpoint of the feasible interval is used.
pub fn svm_dual_oracle(k: &[Vec<f64>], y: &[i8], c: f64) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let y: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let total = 3usize.pow(n as u32);
    let states = |code: usize| {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        state
    };
    for code in 0..total {
        let state = states(code);
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        if free.is_empty() {
            continue;
        }
        let bound: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (cidx, &j) in free.iter().enumerate() {
                a[r][cidx] = y[i] * y[j] * k[i][j];
            }
            a[r][m] = y[i];
            rhs[r] = 1.0 - bound.iter().map(|&j| y[i] * y[j] * k[i][j] * c).sum::<f64>();
        }
        for (cidx, &j) in free.iter().enumerate() {
            a[m][cidx] = y[j];
        }
        rhs[m] = -bound.iter().map(|&j| y[j] * c).sum::<f64>();
        let Some(sol) = gauss_solve(a, rhs) else {
            continue;
        };
        if sol[..m].iter().any(|&v| v <= 1e-10 || v >= c - 1e-10) {
            continue;
        }
        let mut alpha = vec![0.0; n];
        for (r, &i) in free.iter().enumerate() {
            alpha[i] = sol[r];
        }
        for &i in &bound {
            alpha[i] = c;
        }
        let b = sol[m];
        let ok = (0..n).all(|i| {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum::<f64>() + b;
            let margin = y[i] * f;
            match state[i] {
                0 => margin >= 1.0 - 1e-7,
                2 => margin <= 1.0 + 1e-7,
                _ => true,
            }
        });
        if ok {
            return Some((alpha, b));
        }
    }
    for code in 0..total {
        let state = states(code);
        if state.contains(&1) {
            continue;
        }
        let alpha: Vec<f64> = state.iter().map(|&s| if s == 2 { c } else { 0.0 }).collect();
        if alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum::<f64>().abs() > 1e-9 {
            continue;
        }
        let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let g: f64 = (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum();
            // y_i (g + b) >= 1 at zero, <= 1 at the bound
            let edge = y[i] - g;
            let lower = (state[i] == 0) == (y[i] > 0.0);
            if lower {
                lb = lb.max(edge);
            } else {
                ub = ub.min(edge);
            }
        }
        if lb <= ub + 1e-9 {
            return Some((alpha, (lb + ub) / 2.0));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Constructed data.

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scales: &[f64]) -> RowMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = (0..rows * cols)
        .map(|i| normal.sample(rng) * scales[i % cols])
        .collect();
    RowMatrix::new(rows, cols, data).unwrap()
}

/// Several layers of features where only `planted` separates the classes.
pub fn planted_layers(
    seed: u64,
    per_class: usize,
    layers: usize,
    planted: usize,
    dim: usize,
    shift: f64,
) -> (Vec<LayerFeatures>, Vec<i8>) {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let labels: Vec<i8> = (0..2 * per_class).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let feats = (0..layers)
        .map(|layer| {
            let data = labels
                .iter()
                .flat_map(|&y| {
                    (0..dim)
                        .map(|j| {
                            let signal = if layer == planted && j < 3 && y > 0 { shift } else { 0.0 };
                            normal.sample(&mut r) + signal
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            LayerFeatures::new(layer, RowMatrix::new(labels.len(), dim, data).unwrap())
        })
        .collect();
    (feats, labels)
}

pub fn record(utterance: &str, evaluator: &str, words: usize, level: QualitativeLevel) -> AnnotationRecord {
    let none = OccurrenceCount::None;
    AnnotationRecord {
        utterance_id: utterance.into(),
        evaluator_id: evaluator.into(),
        revision: 1,
        phonetic_words: (0..words)
            .map(|i| PhoneticWord {
                word_index: i,
                soda: SodaFlags::default(),
            })
            .collect(),
        phonetic_level: level,
        phonetic_observations: None,
        fluency: FluencyAnnotation {
            blocks: none,
            prolongations: none,
            sound_repetitions: none,
            word_repetitions: none,
            interjections: none,
            level: QualitativeLevel::L3,
        },
        prosody: ProsodyAnnotation {
            accent: none,
            grouping: none,
            modality: none,
            level: QualitativeLevel::L3,
        },
        global: GlobalObservations::default(),
        timestamp: "2024-05-01T09:00:00Z".parse().unwrap(),
    }
}

pub const TREND_PHONES: [&str; 9] = ["p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "sil"];
const WORDS_PER_UTTERANCE: usize = 3;
const PHONES_PER_WORD: usize = 2;
const FRAME_SHIFT_MS: f64 = 20.0;

/// Noise scale per level; cleaner posteriors at higher levels.
pub const TREND_NOISE: [f64; 4] = [3.0, 2.0, 1.2, 0.5];

/// Writes a corpus of `per_level * 4` utterances: canonical one-hot logits
/// plus Gaussian noise shrinking with the level. Levels 1 to 3 come from
/// annotation records; level 4 utterances are typically-developing
/// reference speakers in the manifest.
pub fn write_trend_corpus(dir: &Path, per_level: usize, seed: u64) {
    let mut r = rng(seed);
    let silence: BTreeSet<String> = ["sil".to_string()].into();
    let mut utterances = Vec::new();
    let mut alignments = Vec::new();
    let mut records = Vec::new();
    let n_speech = TREND_PHONES.len() - 1;
    for i in 0..per_level * 4 {
        let level = i % 4 + 1;
        let id = format!("t{i:04}");
        let normal = Normal::new(0.0, TREND_NOISE[level - 1]).unwrap();

        let mut intervals = vec![PhoneInterval::new("sil", 0.0, 2.0 * FRAME_SHIFT_MS / 1000.0).unwrap()];
        let mut canonical = vec![n_speech; 2];
        let mut words = Vec::new();
        for w in 0..WORDS_PER_UTTERANCE {
            let mut phones = Vec::new();
            for _ in 0..PHONES_PER_WORD {
                let p = r.gen_range(0..n_speech);
                let frames = r.gen_range(3..=5);
                let start = canonical.len() as f64 * FRAME_SHIFT_MS / 1000.0;
                canonical.extend(std::iter::repeat(p).take(frames));
                let end = canonical.len() as f64 * FRAME_SHIFT_MS / 1000.0;
                intervals.push(PhoneInterval::new(TREND_PHONES[p], start, end).unwrap().with_word(w));
                phones.push(TREND_PHONES[p].to_string());
            }
            words.push(serde_json::json!({
                "index": w,
                "surface": format!("w{w}"),
                "canonical_phones": phones,
            }));
        }
        let tail = canonical.len() as f64 * FRAME_SHIFT_MS / 1000.0;
        canonical.extend([n_speech; 2]);
        intervals.push(
            PhoneInterval::new("sil", tail, canonical.len() as f64 * FRAME_SHIFT_MS / 1000.0).unwrap(),
        );

        let cols = TREND_PHONES.len();
        let mut logits = Vec::with_capacity(canonical.len() * cols);
        for &c in &canonical {
            for j in 0..cols {
                let base = if j == c { 4.0 } else { 0.0 };
                logits.push(base + normal.sample(&mut r));
            }
        }
        let matrix = RowMatrix::new(canonical.len(), cols, logits).unwrap();
        let labels = TREND_PHONES.iter().map(|s| s.to_string()).collect();
        write_container(
            &posterior_path(&dir.join("posteriors"), &id),
            &Container::new(matrix, FRAME_SHIFT_MS, labels),
        )
        .unwrap();
        alignments.push(UtteranceAlignment::new(id.clone(), intervals, silence.clone()).unwrap());

        let group = if level == 4 { "TD" } else { "DS" };
        utterances.push(serde_json::json!({
            "id": id,
            "transcript": "w0 w1 w2",
            "words": words,
            "speaker_id": format!("{group}-{}", i % 7),
            "speaker_group": group,
            "audio_path": format!("audio/{id}.wav"),
            "duration_s": canonical.len() as f64 * FRAME_SHIFT_MS / 1000.0,
        }));
        if level < 4 {
            let lvl = QualitativeLevel::from_value(level as i64).unwrap();
            records.push(record(&id, "e1", WORDS_PER_UTTERANCE, lvl));
        }
    }
    let manifest = serde_json::json!({
        "name": "trend",
        "phone_set": TREND_PHONES,
        "utterances": utterances,
    });
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
    write_alignments(&dir.join("alignments.csv"), &alignments).unwrap();
    write_annotations(&dir.join("annotations.json"), &records).unwrap();
}
