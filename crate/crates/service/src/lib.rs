//! HTTP/JSON API over a [`SessionBundle`].
//!
//! | Method | Path | Body / query |
//! |---|---|---|
//! | GET | `/healthz` | |
//! | GET | `/api/cases` | `?page=1&page_size=50` |
//! | GET | `/api/cases/{image_id}` | |
//! | POST | `/api/intervene` | [`api::InterveneRequest`] |
//! | POST | `/api/predict` | [`api::PredictRequest`] |
//!
//! Errors are `{"error": "..."}` with status 400, 404 or 503 (no bundle).

pub mod api;
mod bundle;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tower_http::cors::CorsLayer;

pub use bundle::{BundleError, BundlePaths, SessionBundle};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("no session bundle is loaded")]
    Unavailable,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

/// Shared state; `None` until a bundle is loaded.
pub type AppState = Arc<Option<SessionBundle>>;

fn loaded(state: &AppState) -> Result<&SessionBundle, ApiError> {
    state.as_ref().as_ref().ok_or(ApiError::Unavailable)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn query_usize(q: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ApiError::BadRequest(format!("`{key}` must be a positive integer, got `{v}`"))),
    }
}

async fn healthz(State(state): State<AppState>) -> Json<api::Health> {
    Json(match state.as_ref() {
        Some(b) => api::Health {
            loaded: true,
            n_images: b.n_images(),
            variants: b.heads().map(|h| h.variant()).collect(),
            oracle: b.oracle.clone(),
        },
        None => api::Health { loaded: false, n_images: 0, variants: vec![], oracle: None },
    })
}

async fn cases(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Json<api::CasePage>, ApiError> {
    let b = loaded(&state)?;
    let page = query_usize(&q, "page", 1)?;
    let page_size = query_usize(&q, "page_size", api::DEFAULT_PAGE_SIZE)?;
    Ok(Json(api::list_cases(b, page, page_size)?))
}

async fn case(State(state): State<AppState>, Path(image_id): Path<String>) -> Result<Json<api::CasePayload>, ApiError> {
    Ok(Json(api::case_payload(loaded(&state)?, &image_id)?))
}

async fn intervene(State(state): State<AppState>, body: Bytes) -> Result<Json<api::InterveneResponse>, ApiError> {
    let b = loaded(&state)?;
    Ok(Json(api::intervene(b, &parse_body(&body)?)?))
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<api::PredictResponse>, ApiError> {
    let b = loaded(&state)?;
    Ok(Json(api::predict(b, &parse_body(&body)?)?))
}

/// Routes with permissive CORS for a console served from another origin.
pub fn router(bundle: Option<SessionBundle>) -> Router {
    let state: AppState = Arc::new(bundle);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/cases", get(cases))
        .route("/api/cases/{image_id}", get(case))
        .route("/api/intervene", post(intervene))
        .route("/api/predict", post(predict))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, bundle: SessionBundle) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Some(bundle)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
