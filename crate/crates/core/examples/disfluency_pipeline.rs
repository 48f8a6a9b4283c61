//! Pools frame embeddings, picks a layer and SVM parameters by stratified
//! grid search, trains a detector and applies it to a second corpus.
//!
//! ```text
//! cargo run --release --example disfluency_pipeline
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rubriclab::classifier::{
    cross_corpus_eval, grid_search, train_final, FrameEmbeddingSet, GridConfig, LayerFeatures,
};
use rubriclab::io::PooledLayers;
use rubriclab::model::Disfluency;
use rubriclab::RowMatrix;

const LAYERS: usize = 4;
const DIM: usize = 6;
// only this layer separates blocked from fluent speech
const INFORMATIVE: usize = 2;

fn corpus(n: usize, seed: u64) -> (Vec<LayerFeatures>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let blocked = i % 3 == 0;
        labels.push(if blocked { 1 } else { -1 });
        for layer in 0..LAYERS {
            let frames = rng.gen_range(20..40);
            let data = (0..frames * DIM)
                .map(|k| {
                    let shift = if blocked && layer == INFORMATIVE && k % DIM == 0 { 1.5 } else { 0.0 };
                    rng.gen_range(-1.0..1.0) * 2.0 + shift
                })
                .collect();
            let m = RowMatrix::new(frames, DIM, data).unwrap();
            sets.push(FrameEmbeddingSet::new(format!("s{seed}-{i:03}"), layer, m, 20.0).unwrap());
        }
    }
    let pooled = PooledLayers::from_sets(&sets).unwrap();
    let layers = pooled
        .layers
        .into_iter()
        .map(|(k, m)| LayerFeatures::new(k, m))
        .collect();
    (layers, labels)
}

fn main() {
    let (source, y_source) = corpus(90, 1);
    let (target, y_target) = corpus(60, 2);

    let config = GridConfig {
        gammas: vec![0.01, 0.1, 1.0],
        cs: vec![0.1, 1.0, 10.0],
        folds: 5,
        ..GridConfig::default()
    };
    let grid = grid_search(Disfluency::Blocks, &source, &y_source, &config).unwrap();
    println!(
        "selected layer {} gamma {} C {} (cv F1 {:.3})",
        grid.best_layer,
        grid.best_gamma,
        grid.best_c,
        grid.best_cell().unwrap().mean_f1
    );
    for layer in 0..LAYERS {
        let best = grid
            .cells
            .iter()
            .filter(|c| c.layer == layer)
            .map(|c| c.mean_f1)
            .fold(0.0, f64::max);
        println!("  layer {layer}: best cv F1 {best:.3}");
    }

    let detector = train_final(&grid, &source, &y_source, &config).unwrap();
    println!("PCA kept {} of {} dimensions", detector.pca.k(), detector.pca.dim());

    let report = cross_corpus_eval(&[detector], &target, &[(Disfluency::Blocks, y_target)]).unwrap();
    for row in report.rows {
        println!(
            "target corpus: F1 {:.3} (blocked, n={}) / {:.3} (fluent, n={})",
            row.f1_id, row.support_id, row.f1_nid, row.support_nid
        );
    }
}
