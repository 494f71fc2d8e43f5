//! Error-to-response mapping: every failure becomes a JSON envelope with a
//! machine-readable code.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use tunnelfit_core::api::{codes, ErrorBody};
use tunnelfit_core::estimator::{FitError, RecordError};
use tunnelfit_core::formats::{FormatError, FormatErrorKind};
use tunnelfit_core::model::ModelError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn parse(message: impl ToString) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: codes::PARSE, message: message.to_string() }
    }

    pub fn validation(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: codes::VALIDATION,
            message: message.to_string(),
        }
    }

    pub fn identifiability(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: codes::IDENTIFIABILITY,
            message: message.to_string(),
        }
    }

    pub fn inversion(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: codes::INVERSION,
            message: message.to_string(),
        }
    }

    pub fn not_found(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: codes::NOT_FOUND,
            message: message.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody::new(self.code, self.message))).into_response()
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> Self {
        match e.kind() {
            FormatErrorKind::Parse => ApiError::parse(e),
            FormatErrorKind::Validation => ApiError::validation(e),
        }
    }
}

impl From<FitError> for ApiError {
    fn from(e: FitError) -> Self {
        if e.is_identifiability() {
            ApiError::identifiability(e)
        } else {
            ApiError::validation(e)
        }
    }
}

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        ApiError::validation(e)
    }
}

/// Geometry and parameter problems are validation failures; use
/// [`ApiError::inversion`] explicitly where a model is being inverted.
impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        ApiError::validation(e)
    }
}
