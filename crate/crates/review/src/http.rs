use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;
use triage_core::agreement::write_ratings;

use crate::service::{GradeSubmission, ReviewService};
use crate::ReviewError;

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::Unauthorized => StatusCode::UNAUTHORIZED,
            ReviewError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::OutOfOrder { .. } | ReviewError::QueueDone | ReviewError::Incomplete => StatusCode::CONFLICT,
            ReviewError::UnknownStudy(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.to_string() });
        if let ReviewError::OutOfOrder { head } = &self {
            body["head"] = json!(head);
        }
        (status, Json(body)).into_response()
    }
}

fn bearer(headers: &HeaderMap) -> Result<&str, ReviewError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .ok_or(ReviewError::Unauthorized)
}

async fn queue_head(State(svc): State<Arc<ReviewService>>, headers: HeaderMap) -> Result<Response, ReviewError> {
    let next = svc.next_case(bearer(&headers)?)?;
    Ok(Json(next).into_response())
}

async fn submit_grade(
    State(svc): State<Arc<ReviewService>>,
    headers: HeaderMap,
    Json(sub): Json<GradeSubmission>,
) -> Result<Response, ReviewError> {
    let token = bearer(&headers)?.to_string();
    // Submissions fsync the grade log.
    let outcome =
        tokio::task::spawn_blocking(move || svc.submit(&token, &sub)).await.map_err(|e| ReviewError::Internal(e.to_string()))??;
    Ok(Json(outcome).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    partial: bool,
}

async fn export(
    State(svc): State<Arc<ReviewService>>,
    headers: HeaderMap,
    Path(study): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ReviewError> {
    let rows = svc.export(bearer(&headers)?, &study, q.partial)?;
    let mut buf = Vec::new();
    write_ratings(&mut buf, &rows).map_err(|e| ReviewError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], buf).into_response())
}

async fn progress(State(svc): State<Arc<ReviewService>>, headers: HeaderMap) -> Result<Response, ReviewError> {
    // Exporter-only: progress names every reviewer.
    svc.export(bearer(&headers)?, svc.study_id(), true)?;
    Ok(Json(svc.progress()).into_response())
}

/// API routes, plus the UI bundle from `static_dir` when given.
pub fn router(svc: Arc<ReviewService>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue/head", get(queue_head))
        .route("/api/grades", post(submit_grade))
        .route("/api/studies/{id}/export", get(export))
        .route("/api/progress", get(progress))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(svc: Arc<ReviewService>, addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(svc, static_dir)).await
}
