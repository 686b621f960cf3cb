use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::session::SessionState;

pub type ServiceResult<T> = Result<T, ServiceError>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("query vector has dim {found}, store has dim {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("session is {found:?}, expected {expected:?}")]
    WrongState {
        expected: SessionState,
        found: SessionState,
    },
    #[error("got {found} feedback bits for {expected} results")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Engine(#[from] rfir_core::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownItem(_) => "unknown_item",
            Self::DimMismatch { .. } => "dim_mismatch",
            Self::WrongState { .. } => "wrong_state",
            Self::LengthMismatch { .. } => "length_mismatch",
            Self::NotFound(_) => "not_found",
            Self::BadRequest(_) => "bad_request",
            Self::Transcript(_) => "transcript",
            Self::Engine(_) => "engine",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownItem(_) | Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::DimMismatch { .. } | Self::LengthMismatch { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::WrongState { .. } => StatusCode::CONFLICT,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Engine(rfir_core::Error::ZeroVector { .. } | rfir_core::Error::NonFinite { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::Transcript(_) | Self::Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (
            status,
            Json(json!({ "error": self.code(), "message": self.to_string() })),
        )
            .into_response()
    }
}
