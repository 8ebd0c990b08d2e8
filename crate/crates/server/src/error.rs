use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use trackpilot_core::dsl::Diagnostic;
use trackpilot_core::store::StoreError;
use trackpilot_core::track::TrackError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    BadRequest,
    UnknownEndpoint,
    UnknownId,
    ModelBusy,
    ValidationFailed,
    Internal,
}

impl ErrorKind {
    pub fn status(self) -> u16 {
        match self {
            ErrorKind::BadRequest => 400,
            ErrorKind::UnknownEndpoint | ErrorKind::UnknownId => 404,
            ErrorKind::ModelBusy => 409,
            ErrorKind::ValidationFailed => 422,
            ErrorKind::Internal => 500,
        }
    }
}

/// Error body: `{"v":1,"error":{"kind","message","diagnostics"}}`.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind:?}: {message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    /// Track or program diagnostics for `ValidationFailed`.
    pub diagnostics: Vec<Value>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::BadRequest, message)
    }

    pub fn unknown(what: &str, id: impl std::fmt::Display) -> Self {
        Self::new(ErrorKind::UnknownId, format!("unknown {what} `{id}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Internal, message)
    }

    /// `ValidationFailed` carrying DSL diagnostics.
    pub fn program(diags: &[Diagnostic]) -> Self {
        ApiError {
            kind: ErrorKind::ValidationFailed,
            message: "program has errors".into(),
            diagnostics: diags.iter().map(dsl_diagnostic).collect(),
        }
    }

    /// `ValidationFailed` carrying a track construction error.
    pub fn track(err: &TrackError) -> Self {
        ApiError {
            kind: ErrorKind::ValidationFailed,
            message: "track is invalid".into(),
            diagnostics: vec![track_diagnostic(err)],
        }
    }

    pub fn status(&self) -> u16 {
        self.kind.status()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "v": 1,
            "error": {
                "kind": self.kind,
                "message": self.message,
                "diagnostics": self.diagnostics,
            }
        })
    }
}

pub fn dsl_diagnostic(d: &Diagnostic) -> Value {
    let mut v = serde_json::to_value(d).expect("diagnostic serializes");
    v["source"] = json!("program");
    v
}

fn track_diagnostic(err: &TrackError) -> Value {
    let (kind, field) = match err {
        TrackError::DegenerateInput(_) => ("DegenerateInput", Value::Null),
        TrackError::InvalidWaypoint { name, .. } => ("InvalidWaypoint", json!(name)),
        TrackError::InvalidParameter(_) => ("InvalidParameter", Value::Null),
        TrackError::Malformed(_) => ("Malformed", Value::Null),
    };
    json!({
        "source": "track",
        "severity": "error",
        "code": kind,
        "waypoint": field,
        "message": err.to_string(),
    })
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownModel(id) => ApiError::unknown("model", id),
            StoreError::UnknownTrack(id) => ApiError::unknown("track", id),
            StoreError::UnknownEpisode(id) => ApiError::unknown("episode", id),
            StoreError::InvalidId(id) => ApiError::unknown("id", id),
            StoreError::AlreadyExists(id) => {
                ApiError::new(ErrorKind::ValidationFailed, format!("`{id}` already exists"))
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}
