//! Errors as HTTP responses: a status and `{"error": code, "message": text}`.

use crate::store::StoreError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use goalscope_agents::AgentError;
use goalscope_core::session::SessionError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("unknown {what} `{id}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.code, "message": self.message })),
        )
            .into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let (status, code) = match &e {
            Domain(_) | Problem(_) | GoalsFile(_) => (StatusCode::BAD_REQUEST, "parse"),
            Goal { .. } | Template(_) | TooManyGoals => (StatusCode::BAD_REQUEST, "invalid-goal"),
            EmptyEnforcement | EnforcedNotReferenced(_) | InvalidPlan(_) => (StatusCode::BAD_REQUEST, "bad-request"),
            UnknownGoal(_) | UnknownStep(_) => (StatusCode::NOT_FOUND, "not-found"),
            StepPending(_) => (StatusCode::CONFLICT, "step-pending"),
            StepResolved(_) => (StatusCode::CONFLICT, "step-resolved"),
            DuplicateGoal(_) => (StatusCode::CONFLICT, "duplicate-goal"),
            FrozenGoals => (StatusCode::CONFLICT, "frozen-goals"),
            Exhausted(_) => (StatusCode::UNPROCESSABLE_ENTITY, "budget-exhausted"),
            Conflicts(_) | Efcc(_) => (StatusCode::UNPROCESSABLE_ENTITY, "explanation"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Session(s) => s.into(),
            AgentError::Unavailable(m) => ApiError::conflict("unavailable", m),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string())
    }
}
