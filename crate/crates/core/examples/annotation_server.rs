//! Runs the annotation backend against the bundled 20-utterance fixture.
//!
//! Without arguments a few requests are sent in-process, including a stale
//! revision that is refused. With an address the server listens there until
//! interrupted:
//!
//! ```text
//! cargo run --example annotation_server
//! cargo run --example annotation_server -- 127.0.0.1:8080
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use rubriclab::service::{router, serve, AppState, ServiceConfig};

async fn send(app: &Router, req: Request<Body>) -> String {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8_lossy(&body);
    let short: String = text.chars().take(160).collect();
    format!("{status} {short}")
}

#[tokio::main]
async fn main() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rubric20/manifest.json");
    let data = tempfile::tempdir().unwrap();

    if let Some(addr) = std::env::args().nth(1) {
        let config = ServiceConfig {
            listen: addr.parse().expect("address like 127.0.0.1:8080"),
            data_dir: data.path().to_path_buf(),
            manifest,
        };
        println!("listening on http://{}", config.listen);
        if let Err(e) = serve(config).await {
            eprintln!("{e}");
            std::process::exit(1);
        }
        return;
    }

    let app = router(Arc::new(AppState::open(&manifest, data.path()).unwrap()));
    let get = |uri: &str| Request::get(uri).body(Body::empty()).unwrap();
    println!("{}", send(&app, get("/utterances?page_size=2")).await);

    let record = serde_json::json!({
        "utterance_id": "f01",
        "evaluator_id": "e1",
        "revision": 1,
        "phonetic_words": (0..5).map(|i| serde_json::json!({
            "word_index": i,
            "soda": {"substitution": false, "omission": false, "distortion": i == 2, "addition": false}
        })).collect::<Vec<_>>(),
        "phonetic_level": 2,
        "fluency": {"blocks": "none", "prolongations": "none", "sound_repetitions": "none",
                    "word_repetitions": "none", "interjections": "none", "level": 3},
        "prosody": {"accent": "none", "grouping": "none", "modality": "none", "level": 3},
        "global": {"atypical_pitch": false, "atypical_volume": false},
        "timestamp": "2024-05-01T09:00:00Z"
    });
    let put = |expected: u32| {
        let body = serde_json::json!({"expected_revision": expected, "record": record});
        Request::put("/annotations/f01")
            .header("content-type", "application/json")
            .header("x-evaluator-id", "e1")
            .body(Body::from(body.to_string()))
            .unwrap()
    };
    println!("{}", send(&app, put(0)).await);
    println!("{}", send(&app, put(0)).await);
    println!("{}", send(&app, get("/stats")).await);
    println!("{}", send(&app, get("/export?format=csv")).await);
}
