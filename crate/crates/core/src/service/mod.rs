//! HTTP annotation service.
//!
//! Serves the corpus manifest and audio, accepts rubric annotations with
//! optimistic concurrency, and exposes live statistics and exports. See
//! [`router`] for the endpoints.

mod store;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_manifest, render_annotations_csv, render_annotations_json, CorpusManifest, IoError};
use crate::model::{AnnotationRecord, FieldError, SpeakerGroup, WordToken, ANNOTATION_RECORD_SCHEMA};
use crate::stats::StatsReport;

pub use store::{Snapshot, Store, SubmitError, Submitted, STORE_FILE};

/// Request header naming the evaluator.
pub const EVALUATOR_HEADER: &str = "x-evaluator-id";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("annotation store references unknown utterance `{0}`")]
    UnknownStoredUtterance(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Server(#[source] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub manifest: PathBuf,
}

/// Shared state behind every handler.
#[derive(Debug)]
pub struct AppState {
    pub manifest: CorpusManifest,
    /// Base directory for relative audio paths.
    pub audio_root: PathBuf,
    pub store: Store,
}

impl AppState {
    pub fn open(manifest_path: &Path, data_dir: &Path) -> Result<Self, ServiceError> {
        let manifest = read_manifest(manifest_path)?;
        let store = Store::open(data_dir)?;
        if let Some(r) = store
            .snapshot()
            .records()
            .find(|r| manifest.get(&r.utterance_id).is_none())
        {
            return Err(ServiceError::UnknownStoredUtterance(r.utterance_id.clone()));
        }
        let audio_root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self {
            manifest,
            audio_root,
            store,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Done,
}

/// Progress of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub utterance_id: String,
    pub speaker_group: SpeakerGroup,
    pub status: TaskStatus,
    pub evaluator_id: Option<String>,
    /// 0 while pending.
    pub revision: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPage {
    pub items: Vec<AnnotationTask>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtterancePayload {
    pub id: String,
    pub transcript: String,
    pub words: Vec<WordToken>,
    pub speaker_id: String,
    pub speaker_group: SpeakerGroup,
    pub duration_s: f64,
    pub audio_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub expected_revision: u32,
    pub record: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub revision: u32,
    pub warnings: Vec<crate::model::LintWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationsPayload {
    pub utterance_id: String,
    pub records: Vec<AnnotationRecord>,
}

/// JSON error body shared by every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<FieldError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_revision: Option<u32>,
}

struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self(
            status,
            ErrorBody {
                error: message.into(),
                details: Vec::new(),
                current_revision: None,
            },
        )
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown utterance `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type Shared = Arc<AppState>;

fn evaluator(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    match headers.get(EVALUATOR_HEADER) {
        None => Ok(None),
        Some(v) => v
            .to_str()
            .ok()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Some(s.to_string()))
            .ok_or_else(|| ApiError::bad_request("invalid X-Evaluator-Id header")),
    }
}

#[derive(Debug, Default, Deserialize)]
struct ListQuery {
    status: Option<String>,
    group: Option<String>,
    page: Option<String>,
    page_size: Option<String>,
}

fn parse_number(name: &str, raw: Option<&str>, default: usize, max: usize) -> Result<usize, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse::<usize>()
            .ok()
            .filter(|v| (1..=max).contains(v))
            .ok_or_else(|| ApiError::bad_request(format!("{name} must be an integer in 1..={max}"))),
    }
}

async fn list_utterances(
    State(state): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<ListQuery>,
) -> Result<Json<TaskPage>, ApiError> {
    let status = match q.status.as_deref() {
        None => None,
        Some(s) => Some(match s.to_ascii_lowercase().as_str() {
            "pending" => TaskStatus::Pending,
            "done" => TaskStatus::Done,
            _ => return Err(ApiError::bad_request(format!("invalid status `{s}`"))),
        }),
    };
    let group = match q.group.as_deref() {
        None => None,
        Some(g) => Some(
            g.parse::<SpeakerGroup>()
                .map_err(|e| ApiError::bad_request(e.to_string()))?,
        ),
    };
    let page = parse_number("page", q.page.as_deref(), 1, usize::MAX)?;
    let page_size = parse_number("page_size", q.page_size.as_deref(), DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE)?;
    let who = evaluator(&headers)?;

    let snapshot = state.store.snapshot();
    let mut utterances: Vec<_> = state.manifest.utterances.iter().collect();
    utterances.sort_by(|a, b| a.id.cmp(&b.id));
    let tasks: Vec<AnnotationTask> = utterances
        .into_iter()
        .filter(|u| group.map_or(true, |g| u.speaker_group == g))
        .map(|u| {
            let record = match &who {
                Some(e) => snapshot.get(&u.id, e),
                None => snapshot.for_utterance(&u.id).next(),
            };
            AnnotationTask {
                utterance_id: u.id.clone(),
                speaker_group: u.speaker_group,
                status: if record.is_some() {
                    TaskStatus::Done
                } else {
                    TaskStatus::Pending
                },
                evaluator_id: record.map(|r| r.evaluator_id.clone()).or_else(|| who.clone()),
                revision: record.map_or(0, |r| r.revision),
            }
        })
        .filter(|t| status.map_or(true, |s| t.status == s))
        .collect();
    let total = tasks.len();
    let items = tasks
        .into_iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .collect();
    Ok(Json(TaskPage {
        items,
        page,
        page_size,
        total,
    }))
}

async fn get_utterance(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<UtterancePayload>, ApiError> {
    let u = state.manifest.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    Ok(Json(UtterancePayload {
        id: u.id.clone(),
        transcript: u.transcript.clone(),
        words: u.words.clone(),
        speaker_id: u.speaker_id.clone(),
        speaker_group: u.speaker_group,
        duration_s: u.duration_s,
        audio_url: format!("/audio/{}", u.id),
    }))
}

fn audio_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("wav") => "audio/wav",
        Some("flac") => "audio/flac",
        Some("mp3") => "audio/mpeg",
        Some("ogg") => "audio/ogg",
        _ => "application/octet-stream",
    }
}

async fn get_audio(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let u = state.manifest.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let path = state.manifest.audio_file(u, &state.audio_root);
    let bytes = tokio::fs::read(&path).await.map_err(|_| {
        ApiError::new(StatusCode::NOT_FOUND, format!("audio for `{id}` is not available"))
    })?;
    let mut response = Response::new(Body::from(bytes));
    response
        .headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(audio_type(&path)));
    Ok(response)
}

async fn get_annotations(
    State(state): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<AnnotationsPayload>, ApiError> {
    if state.manifest.get(&id).is_none() {
        return Err(ApiError::not_found(&id));
    }
    let who = evaluator(&headers)?;
    let snapshot = state.store.snapshot();
    let records = snapshot
        .for_utterance(&id)
        .filter(|r| who.as_ref().map_or(true, |e| &r.evaluator_id == e))
        .cloned()
        .collect();
    Ok(Json(AnnotationsPayload {
        utterance_id: id,
        records,
    }))
}

async fn put_annotation(
    State(state): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let u = state.manifest.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let request: SubmitRequest = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        ApiError(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                error: "malformed request body".into(),
                details: vec![FieldError { path, message }],
                current_revision: None,
            },
        )
    })?;
    if request.record.utterance_id != id {
        return Err(ApiError::bad_request(format!(
            "record is for `{}` but the URL names `{id}`",
            request.record.utterance_id
        )));
    }
    if let Some(who) = evaluator(&headers)? {
        if who != request.record.evaluator_id {
            return Err(ApiError::bad_request(format!(
                "record evaluator `{}` differs from the X-Evaluator-Id header `{who}`",
                request.record.evaluator_id
            )));
        }
    }

    let word_count = u.words.len();
    let result = {
        let state = state.clone();
        tokio::task::spawn_blocking(move || {
            state
                .store
                .submit(request.record, request.expected_revision, word_count)
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    };
    match result {
        Ok(s) => {
            let status = if s.created {
                StatusCode::CREATED
            } else {
                StatusCode::OK
            };
            let body = SubmitResponse {
                revision: s.revision,
                warnings: s.warnings,
            };
            Ok((status, Json(body)).into_response())
        }
        Err(SubmitError::Invalid(errs)) => Err(ApiError(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                error: "invalid annotation".into(),
                details: errs.0.into_iter().map(|e| FieldError { path: format!("record.{}", e.path), ..e }).collect(),
                current_revision: None,
            },
        )),
        Err(SubmitError::Conflict { expected, current }) => Err(ApiError(
            StatusCode::CONFLICT,
            ErrorBody {
                error: format!("revision conflict: expected {expected}, current is {current}"),
                details: Vec::new(),
                current_revision: Some(current),
            },
        )),
        Err(SubmitError::Storage(e)) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

fn all_records(state: &AppState) -> Vec<AnnotationRecord> {
    state.store.snapshot().records().cloned().collect()
}

async fn get_stats(State(state): State<Shared>) -> Json<StatsReport> {
    Json(StatsReport::from_records(&all_records(&state)))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn get_export(State(state): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let records = all_records(&state);
    let (bytes, content_type) = match q.format.as_deref().unwrap_or("json") {
        "json" => (render_annotations_json(&records), "application/json"),
        "csv" => (render_annotations_csv(&records), "text/csv; charset=utf-8"),
        other => return Err(ApiError::bad_request(format!("invalid format `{other}` (json or csv)"))),
    };
    let mut response = Response::new(Body::from(bytes));
    response
        .headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    Ok(response)
}

async fn get_schema() -> Response {
    let mut response = Response::new(Body::from(ANNOTATION_RECORD_SCHEMA));
    response.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/schema+json"),
    );
    response
}

/// Routes:
///
/// | method | path | |
/// |---|---|---|
/// | GET | `/utterances?status=&group=&page=&page_size=` | task list |
/// | GET | `/utterances/{id}` | transcript and words |
/// | GET | `/audio/{id}` | audio bytes |
/// | GET | `/annotations/{id}` | stored records |
/// | PUT | `/annotations/{id}` | submit `{expected_revision, record}` |
/// | GET | `/stats` | live statistics |
/// | GET | `/export?format=json\|csv` | full dump |
/// | GET | `/schema/annotation-record` | JSON Schema of a record |
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/utterances", get(list_utterances))
        .route("/utterances/:id", get(get_utterance))
        .route("/audio/:id", get(get_audio))
        .route("/annotations/:id", get(get_annotations).put(put_annotation))
        .route("/stats", get(get_stats))
        .route("/export", get(get_export))
        .route("/schema/annotation-record", get(get_schema))
        .with_state(state)
}

/// Binds `config.listen` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::open(&config.manifest, &config.data_dir)?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.listen,
            source,
        })?;
    axum::serve(listener, router(state))
        .await
        .map_err(ServiceError::Server)
}
