//! HTTP routes.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use photostamp::cipherstream::PhotoId;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::PasError;
use crate::protocol::{handle_verify, VerifyRequest, VerifyResponse};
use crate::registry::{Registration, Registry};

const MAX_BODY: usize = 64 * 1024 * 1024;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub camera_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub photo_id: PhotoId,
    pub registered_at: DateTime<Utc>,
}

pub struct ApiError(PasError);

impl From<PasError> for ApiError {
    fn from(e: PasError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            PasError::PhotoIdCollision(_) => StatusCode::CONFLICT,
            PasError::NotFound(_) => StatusCode::NOT_FOUND,
            PasError::InvalidCamera(_)
            | PasError::MalformedImage(_)
            | PasError::MissingSecret
            | PasError::UnexpectedSecret => StatusCode::BAD_REQUEST,
            PasError::CorruptRegister(_) | PasError::Storage(_) => {
                tracing::error!(error = %self.0, "register failure");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/cameras", post(register))
        .route("/v1/cameras/:photo_id", get(lookup))
        .route("/v1/verify", post(verify))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(registry)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn register(
    State(reg): State<Arc<Registry>>,
    Json(req): Json<RegisterRequest>,
) -> Result<(StatusCode, Json<RegisterResponse>), ApiError> {
    let outcome = tokio::task::spawn_blocking(move || reg.register(&req.camera_id))
        .await
        .map_err(|e| PasError::Storage(std::io::Error::other(e)))??;
    let status = match outcome {
        Registration::Created(_) => StatusCode::CREATED,
        Registration::Existing(_) => StatusCode::OK,
    };
    let r = outcome.record();
    Ok((
        status,
        Json(RegisterResponse {
            photo_id: r.photo_id.clone(),
            registered_at: r.registered_at,
        }),
    ))
}

async fn lookup(State(reg): State<Arc<Registry>>, Path(raw): Path<String>) -> Response {
    let Ok(id) = PhotoId::parse(&raw) else {
        return (StatusCode::BAD_REQUEST, Json(json!({ "error": format!("invalid photo id {raw:?}") })))
            .into_response();
    };
    match reg.lookup(&id) {
        Ok(cam) => Json(json!({ "camera_id": cam.as_str() })).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn verify(
    State(reg): State<Arc<Registry>>,
    Json(req): Json<VerifyRequest>,
) -> Result<Json<VerifyResponse>, ApiError> {
    let resp = tokio::task::spawn_blocking(move || handle_verify(&reg, &req))
        .await
        .map_err(|e| PasError::Storage(std::io::Error::other(e)))??;
    Ok(Json(resp))
}

/// Serve on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, registry: Arc<Registry>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, register = %registry.path().display(), "serving");
    axum::serve(listener, router(registry)).await
}
