use std::fmt;

use predism_core::error::EnsembleError;
use predism_core::Error as CoreError;
use serde::Serialize;

/// Broad failure class, which fixes the HTTP status and the CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad command line.
    Usage,
    /// Request body or parameters that do not parse.
    Malformed,
    /// Well-formed input the pipeline rejects.
    Domain,
    /// An external backbone misbehaved.
    Backend,
    /// Configuration or startup problem.
    Startup,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppError {
    pub kind: ErrorKind,
    /// Machine-readable code from the error taxonomy.
    pub code: String,
    pub message: String,
}

impl AppError {
    pub fn new(kind: ErrorKind, code: impl Into<String>, message: impl Into<String>) -> Self {
        AppError {
            kind,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Malformed, "MalformedRequest", message)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, "UsageError", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Startup, "InvalidConfig", message)
    }

    pub fn startup(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Startup, "BackendStartupFailure", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Internal, "InternalError", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Domain, "NotFound", message)
    }

    pub fn status(&self) -> u16 {
        match self.kind {
            ErrorKind::Usage | ErrorKind::Malformed => 400,
            ErrorKind::Domain if self.code == "NotFound" => 404,
            ErrorKind::Domain => 422,
            ErrorKind::Backend | ErrorKind::Startup | ErrorKind::Internal => 500,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 1,
            _ => 2,
        }
    }

    pub fn body(&self) -> ErrorBody<'_> {
        ErrorBody {
            error: ErrorDetail {
                code: &self.code,
                message: &self.message,
            },
        }
    }
}

#[derive(Serialize)]
pub struct ErrorBody<'a> {
    pub error: ErrorDetail<'a>,
}

#[derive(Serialize)]
pub struct ErrorDetail<'a> {
    pub code: &'a str,
    pub message: &'a str,
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for AppError {}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::Ensemble(EnsembleError::BackboneFailure { .. }) => ErrorKind::Backend,
            _ => ErrorKind::Domain,
        };
        AppError::new(kind, e.code(), e.to_string())
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for AppError {
            fn from(e: $t) -> Self {
                CoreError::from(e).into()
            }
        }
    )*};
}

from_core!(
    predism_core::error::RasterError,
    predism_core::error::HazardError,
    predism_core::error::DatasetError,
    predism_core::error::EnsembleError,
    predism_core::error::MapError
);

#[cfg(test)]
mod tests {
    use super::*;
    use predism_core::error::{HazardError, MapError};

    #[test]
    fn status_and_exit_mapping() {
        let backend: AppError = EnsembleError::BackboneFailure {
            backbone: "x".into(),
            message: "timeout".into(),
        }
        .into();
        assert_eq!((backend.status(), backend.code.as_str()), (500, "BackboneFailure"));
        let domain: AppError = HazardError::NoAttributes.into();
        assert_eq!(domain.status(), 422);
        assert_eq!(domain.exit_code(), 2);
        let unknown: AppError = EnsembleError::UnknownDisasterType("meteor".into()).into();
        assert_eq!((unknown.status(), unknown.code.as_str()), (422, "UnknownDisasterType"));
        assert_eq!(AppError::malformed("x").status(), 400);
        assert_eq!(AppError::usage("x").exit_code(), 1);
        let geo: AppError = MapError::MissingGeoBounds.into();
        assert_eq!(geo.code, "MissingGeoBounds");
        let v = serde_json::to_value(geo.body()).unwrap();
        assert_eq!(v["error"]["code"], "MissingGeoBounds");
    }
}
