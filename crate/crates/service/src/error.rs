use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use phasefield::Error;

/// Error body: `{"error": "...", "path": "lambda1"}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub path: Option<String>,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl ApiError {
    pub fn bad_request(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            path: Some(path.into()),
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            path: None,
            message: message.into(),
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            path: None,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            path: None,
            message: message.into(),
        }
    }

    /// Re-roots a validation error under `prefix`, e.g. `pairs[2].initial`.
    pub fn at(mut self, prefix: &str) -> Self {
        if self.status == StatusCode::BAD_REQUEST {
            self.path = Some(match self.path.as_deref() {
                None | Some("") => prefix.to_owned(),
                Some(p) => format!("{prefix}.{p}"),
            });
        }
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Schema { path, .. } => Self::bad_request(path, message),
            Error::StaleAnnotation { .. } => Self::conflict(message),
            Error::LabelOutOfRange { .. } => Self::bad_request("selected", message),
            Error::InvalidK(_) => Self::bad_request("k", message),
            Error::DimensionMismatch(..) | Error::InvalidMask(_) | Error::Config(_) => Self {
                status: StatusCode::BAD_REQUEST,
                path: None,
                message,
            },
            _ => Self::internal(message),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: &self.message,
            path: self.path.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
