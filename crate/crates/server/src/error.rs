use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use tagmill_core::Error;

/// An error as returned to HTTP clients.
#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    Unauthorized,
    Forbidden(String),
    BadRequest(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

fn core_status(e: &Error) -> (StatusCode, &'static str) {
    use Error::*;
    match e {
        Span(_) | InvalidPayload(_) => (StatusCode::BAD_REQUEST, "invalid_payload"),
        InvalidSchema(_) => (StatusCode::BAD_REQUEST, "invalid_schema"),
        MalformedDataset(_) => (StatusCode::BAD_REQUEST, "malformed_dataset"),
        MalformedRows(_) => (StatusCode::BAD_REQUEST, "malformed_rows"),
        InvalidRegex(_) => (StatusCode::BAD_REQUEST, "invalid_regex"),
        InvalidThreshold(_) => (StatusCode::BAD_REQUEST, "invalid_threshold"),
        InvalidPlan(_) => (StatusCode::BAD_REQUEST, "invalid_plan"),
        RedundancyExceedsTeam { .. } => (StatusCode::BAD_REQUEST, "redundancy_exceeds_team"),
        MalformedImport { .. } => (StatusCode::BAD_REQUEST, "malformed_import"),
        Json(_) => (StatusCode::BAD_REQUEST, "invalid_json"),
        UnknownDataset(_) => (StatusCode::NOT_FOUND, "unknown_dataset"),
        UnknownExample(_) => (StatusCode::NOT_FOUND, "unknown_example"),
        UnknownSchema(_) => (StatusCode::NOT_FOUND, "unknown_schema"),
        UnknownTeam(_) => (StatusCode::NOT_FOUND, "unknown_team"),
        UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "unknown_annotator"),
        UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
        UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
        UnknownIdeal(_) => (StatusCode::NOT_FOUND, "unknown_ideal"),
        UnknownPreAnnotation(_) => (StatusCode::NOT_FOUND, "unknown_preannotation"),
        ExampleNotInJob { .. } => (StatusCode::NOT_FOUND, "example_not_in_job"),
        NotTeamMember { .. } => (StatusCode::FORBIDDEN, "not_team_member"),
        NotTaskOwner { .. } => (StatusCode::FORBIDDEN, "not_task_owner"),
        ConflictsWithAccepted(_) => (StatusCode::CONFLICT, "conflicts_with_accepted"),
        DuplicateExample(_) => (StatusCode::CONFLICT, "duplicate_example"),
        AlreadyExists(_) => (StatusCode::CONFLICT, "already_exists"),
        TaskNotLeased(_) => (StatusCode::CONFLICT, "task_not_leased"),
        JobNotOpen(_) => (StatusCode::CONFLICT, "job_not_open"),
        JobIncomplete(_) => (StatusCode::CONFLICT, "job_incomplete"),
        ExampleSaturated { .. } => (StatusCode::CONFLICT, "example_saturated"),
        DuplicateTask { .. } => (StatusCode::CONFLICT, "duplicate_task"),
        WrongJobKind(_) => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_job_kind"),
        NoGold(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_gold"),
        InjectedFault(_) | Storage(_) | Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Core(e) => {
                let (status, code) = core_status(&e);
                let mut body = json!({ "error": code, "message": e.to_string() });
                let extra: Option<(&str, Value)> = match &e {
                    Error::MalformedDataset(d) | Error::MalformedRows(d) => Some(("diagnostics", json!(d))),
                    Error::ConflictsWithAccepted(b) => Some(("blockers", json!(b))),
                    Error::MalformedImport { line, .. } => Some(("line", json!(line))),
                    _ => None,
                };
                if let Some((key, value)) = extra {
                    body[key] = value;
                }
                if status == StatusCode::INTERNAL_SERVER_ERROR {
                    tracing::error!(error = %e, "request failed");
                }
                (status, body)
            }
            ApiError::Unauthorized => {
                (StatusCode::UNAUTHORIZED, json!({ "error": "unauthorized", "message": "missing or unknown bearer token" }))
            }
            ApiError::Forbidden(m) => (StatusCode::FORBIDDEN, json!({ "error": "forbidden", "message": m })),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": "bad_request", "message": m })),
            ApiError::Internal(m) => {
                tracing::error!(error = %m, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "internal", "message": m }))
            }
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
