//! HTTP annotation service.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /api/papers` | papers, least-annotated first |
//! | `GET /api/papers/{id}?annotator=A` | shuffled session view |
//! | `POST /api/papers/{id}/annotations` | record a ranking |
//! | `GET /api/export` | gold JSONL |
//! | `GET /api/coverage` | annotation coverage counts |
//! | `GET /api/agreement` | ordinal Krippendorff's alpha |
//!
//! Figure images are served under `/images`, and the UI bundle (if any)
//! from `/`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use figsum_core::annotation::{session_seed, shuffle_figures, AnnotationStore, SessionView};
use figsum_core::corpus::{GoldAnnotation, Violation};
use figsum_core::ranking::agreement_summary;
use figsum_core::Error;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<AnnotationStore>,
    /// Base seed that per-annotator session seeds derive from.
    pub base_seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct StaticDirs {
    pub images: Option<PathBuf>,
    pub ui: Option<PathBuf>,
}

pub fn router(state: AppState, dirs: StaticDirs) -> Router {
    let mut app = Router::new()
        .route("/api/papers", get(list_papers))
        .route("/api/papers/{id}", get(paper_view))
        .route("/api/papers/{id}/annotations", axum::routing::post(submit))
        .route("/api/export", get(export))
        .route("/api/coverage", get(coverage))
        .route("/api/agreement", get(agreement))
        .with_state(state);
    if let Some(images) = dirs.images {
        app = app.nest_service("/images", ServeDir::new(images));
    }
    if let Some(ui) = dirs.ui {
        app = app.fallback_service(ServeDir::new(ui).append_index_html_on_directories(true));
    }
    app
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    errors: Vec<Violation>,
}

fn error(status: StatusCode, msg: impl Into<String>, errors: Vec<Violation>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: msg.into(),
            errors,
        }),
    )
        .into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), Vec::new())
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PaperSummary {
    pub paper_id: String,
    pub title: String,
    pub n_figures: usize,
    /// `unannotated`, `single` or `multiple`.
    pub annotation_status: String,
    pub annotators: usize,
}

async fn list_papers(State(state): State<AppState>) -> Json<Vec<PaperSummary>> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for a in state.store.latest() {
        *counts.entry(a.paper_id).or_default() += 1;
    }
    let mut papers: Vec<PaperSummary> = state
        .store
        .corpus()
        .docs()
        .iter()
        .map(|d| {
            let n = counts.get(&d.id).copied().unwrap_or(0);
            PaperSummary {
                paper_id: d.id.clone(),
                title: d.title.clone(),
                n_figures: d.figures.len(),
                annotation_status: match n {
                    0 => "unannotated",
                    1 => "single",
                    _ => "multiple",
                }
                .into(),
                annotators: n,
            }
        })
        .collect();
    papers.sort_by_key(|p| p.annotators);
    Json(papers)
}

#[derive(Debug, Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

/// Session view plus the annotator's previous ranking, if any.
#[derive(Debug, Serialize, Deserialize)]
pub struct PaperView {
    #[serde(flatten)]
    pub session: SessionView,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub previous_ranking: Option<Vec<String>>,
}

async fn paper_view(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
) -> Response {
    let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) else {
        return error(
            StatusCode::BAD_REQUEST,
            "query parameter 'annotator' is required",
            Vec::new(),
        );
    };
    let Some(doc) = state.store.corpus().get(&id) else {
        return error(
            StatusCode::NOT_FOUND,
            format!("unknown paper '{id}'"),
            Vec::new(),
        );
    };
    let session = shuffle_figures(doc, session_seed(state.base_seed, &annotator));
    let previous_ranking = state
        .store
        .annotations_for(&id)
        .into_iter()
        .find(|a| a.annotator_id == annotator)
        .map(|a| a.ranking);
    Json(PaperView {
        session,
        previous_ranking,
    })
    .into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Submission {
    pub annotator_id: String,
    pub ranking: Vec<String>,
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Submission>, JsonRejection>,
) -> Response {
    let Json(sub) = match body {
        Ok(b) => b,
        Err(e) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                "malformed body",
                vec![Violation::new("body", e.body_text())],
            )
        }
    };
    if state.store.corpus().get(&id).is_none() {
        return error(
            StatusCode::NOT_FOUND,
            format!("unknown paper '{id}'"),
            Vec::new(),
        );
    }
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64);
    let ann = GoldAnnotation {
        paper_id: id,
        annotator_id: sub.annotator_id,
        ranking: sub.ranking,
        ts,
    };
    let store = Arc::clone(&state.store);
    match tokio::task::spawn_blocking(move || store.record_annotation(ann)).await {
        Ok(Ok(ack)) => (StatusCode::CREATED, Json(ack)).into_response(),
        Ok(Err(Error::InvalidAnnotation(v))) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "invalid annotation", v)
        }
        Ok(Err(e)) => internal(e),
        Err(e) => internal(e),
    }
}

async fn export(State(state): State<AppState>) -> Response {
    let (jsonl, _) = state.store.export_gold();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], jsonl).into_response()
}

async fn coverage(State(state): State<AppState>) -> Response {
    Json(state.store.export_gold().1).into_response()
}

async fn agreement(State(state): State<AppState>) -> Response {
    let figures: HashMap<String, Vec<String>> = state
        .store
        .corpus()
        .docs()
        .iter()
        .map(|d| {
            (
                d.id.clone(),
                d.figures.iter().map(|f| f.id.clone()).collect(),
            )
        })
        .collect();
    match agreement_summary(&state.store.latest(), &figures) {
        Ok(summary) => Json(summary).into_response(),
        Err(e) => internal(e),
    }
}
