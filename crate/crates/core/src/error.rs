use serde::Serialize;
use thiserror::Error;

use crate::store::FaultPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of [`normalize_span`](crate::model::normalize_span).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("span {start}..{end} is out of bounds for content of {len} code points")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("span {start}..{end} contains only whitespace")]
    EmptyAfterTrim { start: usize, end: usize },
}

/// One problem found while validating an uploaded document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// JSON path of the offending value, e.g. `examples[3].content`.
    pub field: String,
    /// 1-based line in the uploaded text, when the problem is a parse error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), line: None, message: message.into() }
    }
}

/// An ideal that could not be accepted because a conflicting ideal is already accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcceptBlocker {
    pub ideal_id: String,
    pub accepted_ideal_id: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("malformed dataset ({} problem(s))", .0.len())]
    MalformedDataset(Vec<Diagnostic>),
    #[error("malformed upload ({} problem(s))", .0.len())]
    MalformedRows(Vec<Diagnostic>),
    #[error("invalid regex: {0}")]
    InvalidRegex(String),
    #[error("example {0} is already indexed")]
    DuplicateExample(String),

    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("unknown example {0}")]
    UnknownExample(String),
    #[error("unknown schema {0}")]
    UnknownSchema(String),
    #[error("unknown team {0}")]
    UnknownTeam(String),
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown ideal {0}")]
    UnknownIdeal(String),
    #[error("unknown pre-annotation {0}")]
    UnknownPreAnnotation(String),

    #[error("redundancy {redundancy} exceeds team size {team_size}")]
    RedundancyExceedsTeam { redundancy: usize, team_size: usize },
    #[error("invalid task plan: {0}")]
    InvalidPlan(String),
    #[error("annotator {annotator} is not a member of the team for job {job}")]
    NotTeamMember { job: String, annotator: String },
    #[error("task {0} is not leased")]
    TaskNotLeased(String),
    #[error("task {task} is leased by another annotator")]
    NotTaskOwner { task: String },
    #[error("job {0} is not open")]
    JobNotOpen(String),
    #[error("job {0} still has unsubmitted tasks")]
    JobIncomplete(String),
    #[error("example {example} already has {redundancy} annotators in job {job}")]
    ExampleSaturated { job: String, example: String, redundancy: usize },
    #[error("task for annotator {annotator} on example {example} already exists")]
    DuplicateTask { annotator: String, example: String },
    #[error("{0} already exists")]
    AlreadyExists(String),

    #[error("example {example} is not part of job {job}")]
    ExampleNotInJob { job: String, example: String },
    #[error("conflicts with an accepted ideal")]
    ConflictsWithAccepted(Vec<AcceptBlocker>),
    #[error("threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("job {0} is not a single-label classification job")]
    WrongJobKind(String),
    #[error("job {0} has no accepted ideals")]
    NoGold(String),

    #[error("malformed import at line {line}: {message}")]
    MalformedImport { line: usize, message: String },

    #[error("injected fault at {0:?}")]
    InjectedFault(FaultPoint),
    #[error("storage: {0}")]
    Storage(#[from] rusqlite::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
