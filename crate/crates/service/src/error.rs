use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mammoseg_core::imaging::ImagingError;
use mammoseg_core::{MeasureError, PgmError, PipelineError, ReportError};
use serde::Serialize;

/// Error response with the uniform `{error_code, message, field?}` body.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error_code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), field: None }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} not found"))
    }

    pub fn invalid_params(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidParams", message)
    }

    pub fn prerequisite(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "PrerequisiteMissing", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error_code: self.code, message: &self.message, field: self.field.as_deref() };
        (self.status, Json(body)).into_response()
    }
}

impl From<PgmError> for ApiError {
    fn from(e: PgmError) -> Self {
        let code = match e {
            PgmError::BadMagic => "BadMagic",
            PgmError::BadHeader(_) => "BadHeader",
            PgmError::TruncatedRaster { .. } => "TruncatedRaster",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl From<ImagingError> for ApiError {
    fn from(e: ImagingError) -> Self {
        let field = match e {
            ImagingError::EvenWindow(_) => "window",
            ImagingError::UnknownElement(_) | ImagingError::OriginMissing => "se",
            ImagingError::BadConnectivity(_) => "connectivity",
            ImagingError::InvalidParameter(_) => "h_min",
            _ => return ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ImagingError", e.to_string()),
        };
        ApiError::invalid_params(e.to_string()).with_field(field)
    }
}

impl From<MeasureError> for ApiError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::InvalidCalibration(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidCalibration", e.to_string())
                    .with_field("cm_per_pixel")
            }
            MeasureError::LineOutOfBounds { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "LineOutOfBounds", e.to_string()).with_field("line")
            }
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::PrerequisiteMissing { .. } => ApiError::prerequisite(e.to_string()),
            PipelineError::UnknownStep(_) => ApiError::not_found(e.to_string().replacen("unknown ", "", 1)),
            PipelineError::Imaging(e) => e.into(),
            PipelineError::Measure(e) => e.into(),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Validation { ref field, .. } => {
                let field = field.clone();
                ApiError::new(StatusCode::BAD_REQUEST, "ValidationError", e.to_string()).with_field(field)
            }
            ReportError::Classification(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ClassificationError", e.to_string())
            }
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "PersistenceError", e.to_string())
    }
}
