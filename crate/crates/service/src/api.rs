use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use rfir_core::engine::RankedList;
use rfir_core::store::LabeledItem;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{ServiceError, ServiceResult};
use crate::session::{Refinement, Session, SessionManager, SessionQuery};

// Everything but RFC 3986 unreserved characters, so ids that are relative
// paths stay a single path segment.
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

#[derive(Clone)]
struct AppState {
    manager: Arc<SessionManager>,
    summary: Arc<CorpusSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorpusSummary {
    pub count: usize,
    pub dim: usize,
    pub label_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    query_id: Option<String>,
    vector: Option<Vec<f32>>,
    m: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct FeedbackRequest {
    bits: Vec<u8>,
}

#[derive(Debug, Serialize)]
struct ResultItem<'a> {
    id: &'a str,
    score: f64,
    image_url: String,
    labels: Vec<&'a str>,
}

#[derive(Debug, Serialize)]
struct RatingView<'a> {
    id: &'a str,
    relevant: bool,
}

pub fn image_url(id: &str) -> String {
    format!("/api/items/{}/image", utf8_percent_encode(id, SEGMENT))
}

fn result_items<'a>(manager: &'a SessionManager, list: &'a RankedList) -> Vec<ResultItem<'a>> {
    let ds = manager.dataset();
    list.iter()
        .map(|e| ResultItem {
            id: &e.item_id,
            score: e.score,
            image_url: image_url(&e.item_id),
            labels: ds.item(e.row).labels.iter().map(String::as_str).collect(),
        })
        .collect()
}

fn snapshot(manager: &SessionManager, s: &Session) -> serde_json::Value {
    let query = match &s.query {
        SessionQuery::ItemId(id) => serde_json::json!({ "item_id": id }),
        SessionQuery::Vector(v) => serde_json::json!({ "vector": v }),
    };
    serde_json::json!({
        "session_id": s.session_id,
        "query": query,
        "state": s.state,
        "m": s.m,
        "first_results": result_items(manager, &s.first_results),
        "feedback": s.feedback.as_ref().map(|f| f
            .iter()
            .map(|r| RatingView { id: &r.id, relevant: r.relevant })
            .collect::<Vec<_>>()),
        "refined_results": s.refined_results.as_ref().map(|l| result_items(manager, l)),
        "failure": s.failure,
        "created_at": s.created_at,
        "updated_at": s.updated_at,
    })
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ServiceResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> ServiceResult<Response> {
    let req = body(payload)?;
    let query = match (req.query_id, req.vector) {
        (Some(id), None) => SessionQuery::ItemId(id),
        (None, Some(v)) => SessionQuery::Vector(v),
        _ => {
            return Err(ServiceError::BadRequest(
                "give exactly one of query_id and vector".into(),
            ))
        }
    };
    let manager = &state.manager;
    let session = manager.create_session(query, req.m)?;
    let out = serde_json::json!({
        "session_id": session.session_id,
        "results": result_items(manager, &session.first_results),
    });
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn submit_feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<FeedbackRequest>, JsonRejection>,
) -> ServiceResult<Json<serde_json::Value>> {
    let req = body(payload)?;
    let manager = &state.manager;
    let out = match manager.submit_feedback(&id, &req.bits)? {
        Refinement::Ranked(list) => {
            serde_json::json!({ "results": result_items(manager, &list) })
        }
        Refinement::NoPreferredCandidates => serde_json::json!({
            "failure": true,
            "message": "no preferred candidates",
        }),
    };
    Ok(Json(out))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Json<serde_json::Value>> {
    let s = state.manager.get_session(&id)?;
    Ok(Json(snapshot(&state.manager, &s)))
}

async fn corpus_summary(State(state): State<AppState>) -> Json<CorpusSummary> {
    Json(state.summary.as_ref().clone())
}

fn content_type(path: &std::path::Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// An SVG card showing the item id and its labels.
pub fn placeholder_svg(item: &LabeledItem) -> String {
    let labels = item
        .labels
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        concat!(
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="224" height="224" viewBox="0 0 224 224">"##,
            r##"<rect width="224" height="224" fill="#e8e8e8"/>"##,
            r##"<text x="112" y="104" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"##,
            r##"<text x="112" y="128" font-family="sans-serif" font-size="11" fill="#555" text-anchor="middle">{}</text>"##,
            "</svg>"
        ),
        escape_xml(&item.id),
        escape_xml(&labels)
    )
}

fn image_path(root: Option<&PathBuf>, uri: &str) -> PathBuf {
    let p = PathBuf::from(uri.strip_prefix("file://").unwrap_or(uri));
    match root {
        Some(root) if p.is_relative() => root.join(p),
        _ => p,
    }
}

async fn item_image(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Response> {
    let manager = &state.manager;
    let (_, item) = manager
        .dataset()
        .get(&id)
        .ok_or_else(|| ServiceError::UnknownItem(id.clone()))?;
    if let Some(uri) = &item.image_uri {
        let path = image_path(manager.config().image_root.as_ref(), uri);
        if let Ok(bytes) = tokio::fs::read(&path).await {
            return Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response());
        }
        tracing::debug!(path = %path.display(), "image missing, serving placeholder");
    }
    Ok((
        [(header::CONTENT_TYPE, "image/svg+xml")],
        placeholder_svg(item),
    )
        .into_response())
}

/// Label counts over the whole corpus.
pub fn corpus_summary_of(manager: &SessionManager) -> CorpusSummary {
    let ds = manager.dataset();
    let mut label_histogram = BTreeMap::new();
    for item in ds.corpus().items() {
        for label in &item.labels {
            *label_histogram.entry(label.clone()).or_insert(0) += 1;
        }
    }
    CorpusSummary {
        count: ds.len(),
        dim: ds.store().dim(),
        label_histogram,
    }
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    let static_dir = manager.config().static_dir.clone();
    let state = AppState {
        summary: Arc::new(corpus_summary_of(&manager)),
        manager,
    };
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/feedback", post(submit_feedback))
        .route("/api/items/{id}/image", get(item_image))
        .route("/api/corpus/summary", get(corpus_summary))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
