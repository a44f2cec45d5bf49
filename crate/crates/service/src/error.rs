use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mqm_core::metric::Violation;
use mqm_store::StoreError;
use serde::{Deserialize, Serialize};

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Vec<Violation>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<mqm_core::Error> for ApiError {
    fn from(err: mqm_core::Error) -> Self {
        use mqm_core::Error as E;
        let code = match &err {
            E::Malformed(_) => return Self::bad_request(err.to_string()),
            E::InvalidMetric(violations) => {
                let mut api = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_metric", err.to_string());
                api.details = Some(violations.clone());
                return api;
            }
            E::Invalid { .. } => "invalid_document",
            E::UnknownErrorType(_) => "unknown_error_type",
            E::UnknownSeverity(_) => "unknown_severity",
            E::Precondition(_) => "precondition_failed",
            E::Fit(_) => "fit_rejected",
            E::OutOfRange { .. } => "out_of_range",
            E::NoPlan(_) => "no_plan",
            E::Config(_) => "configuration",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, err.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound { .. } => Self::not_found(err.to_string()),
            StoreError::Malformed { source, .. } => source.into(),
            StoreError::UnknownKind(_) | StoreError::BadId => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_id", err.to_string())
            }
            StoreError::Corrupt { .. } | StoreError::Io(_) => Self::internal(err.to_string()),
        }
    }
}

// Axum answers undeserializable JSON with 422; here that is a malformed body.
impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
