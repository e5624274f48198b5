use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Extension, Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tagmill_core::analytics::{ClassAgreement, PairAgreement, PrecisionRecall, DEFAULT_WINDOW_MINUTES};
use tagmill_core::catalog::{parse_dataset_document, ContextGroup, ExampleInput};
use tagmill_core::export::{ExportFilter, FORMAT_VERSION};
use tagmill_core::model::{Annotator, Example, JobState, PreAnnotation, Schema, Scope, Task, Verdict};
use tagmill_core::preannotation::{PreAnnotationRow, RegexRule};
use tagmill_core::scheduler::{JobSpec, Submission};
use tagmill_core::search::{SearchQuery, DEFAULT_LIMIT};
use tagmill_core::Error;

use crate::error::{ApiError, ApiResult};
use crate::{AppState, Identity};

type S = State<AppState>;
type Me = Extension<Identity>;

pub(crate) fn router() -> Router<AppState> {
    Router::new()
        .route("/datasets", post(create_dataset))
        .route("/datasets/:id", get(get_dataset))
        .route("/datasets/:id/examples", get(list_examples).post(add_examples))
        .route("/datasets/:id/examples/:ex", get(get_example))
        .route("/datasets/:id/examples/:ex/context", get(get_context))
        .route("/datasets/:id/search", get(search))
        .route("/schemas", post(create_schema))
        .route("/schemas/:id", get(get_schema))
        .route("/annotators", post(upsert_annotator))
        .route("/annotators/:id", get(get_annotator))
        .route("/teams", post(create_team))
        .route("/teams/:id", get(get_team))
        .route("/teams/:id/members", post(add_member))
        .route("/jobs", post(create_job))
        .route("/jobs/:id", get(get_job))
        .route("/jobs/:id/state", post(set_job_state))
        .route("/jobs/:id/tasks", get(list_tasks).post(assign_task))
        .route("/jobs/:id/tasks/next", post(next_task))
        .route("/jobs/:id/reprioritize", post(reprioritize))
        .route("/tasks/:id", get(get_task))
        .route("/tasks/:id/submit", post(submit_task))
        .route("/tasks/:id/revoke", post(revoke_task))
        .route("/jobs/:id/review/:ex", get(review_example))
        .route("/ideals/:id", get(get_ideal))
        .route("/ideals/:id/accept", post(accept_ideal))
        .route("/ideals/:id/reject", post(reject_ideal))
        .route("/jobs/:id/judgments", get(list_judgments))
        .route("/jobs/:id/batch-accept", post(batch_accept))
        .route("/jobs/:id/lexical-groups", get(lexical_groups))
        .route("/jobs/:id/lexical-groups/review", post(lexical_review))
        .route("/jobs/:id/metrics", get(metrics))
        .route("/jobs/:id/progress", get(progress))
        .route("/jobs/:id/preannotations", get(list_preannotations).post(upload_preannotations))
        .route("/jobs/:id/preannotators/regex", post(run_regex))
        .route("/jobs/:id/export", get(export_job))
        .route("/jobs/:id/import", post(import_job))
        .route("/jobs/:id/annotations", delete(wipe_job))
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

// Datasets

#[derive(Deserialize)]
struct NameQuery {
    name: Option<String>,
}

async fn create_dataset(
    State(st): S,
    Extension(me): Me,
    q: Result<Query<NameQuery>, QueryRejection>,
    raw: Bytes,
) -> ApiResult<Response> {
    me.require_manager()?;
    let name = query(q)?.name;
    let text = String::from_utf8(raw.to_vec()).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    let dataset = st
        .run(move |p| {
            let doc = parse_dataset_document(&text)?;
            let fallback = name.clone().unwrap_or_else(|| "dataset".into());
            let doc = match name {
                Some(n) => tagmill_core::catalog::DatasetDocument { name: Some(n), ..doc },
                None => doc,
            };
            p.import_dataset_document(&doc, &fallback)
        })
        .await?;
    Ok(created(dataset))
}

async fn get_dataset(State(st): S, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.run(move |p| p.dataset(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct Page {
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn list_examples(
    State(st): S,
    Path(id): Path<String>,
    q: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<Vec<Example>>> {
    let page = query(q)?;
    let (limit, offset) = (page.limit.unwrap_or(DEFAULT_LIMIT), page.offset.unwrap_or(0));
    Ok(Json(st.run(move |p| p.examples(&id, limit, offset)).await?))
}

async fn add_examples(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let examples: Vec<ExampleInput> = body(&raw)?;
    Ok(created(st.run(move |p| p.add_examples(&id, &examples)).await?))
}

async fn get_example(State(st): S, Path((id, ex)): Path<(String, String)>) -> ApiResult<Json<Example>> {
    Ok(Json(st.run(move |p| p.example(&id, &ex)).await?))
}

async fn get_context(State(st): S, Path((id, ex)): Path<(String, String)>) -> ApiResult<Json<ContextGroup>> {
    Ok(Json(st.run(move |p| p.context_group(&id, &ex)).await?))
}

#[derive(Deserialize)]
struct SearchParams {
    #[serde(alias = "pattern")]
    q: String,
    #[serde(default)]
    case_insensitive: bool,
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn search(
    State(st): S,
    Path(id): Path<String>,
    q: Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<Response> {
    let params = query(q)?;
    let search = SearchQuery {
        pattern: params.q,
        case_insensitive: params.case_insensitive,
        limit: params.limit.unwrap_or(DEFAULT_LIMIT),
        offset: params.offset.unwrap_or(0),
    };
    Ok(Json(st.run(move |p| p.search(&id, &search)).await?).into_response())
}

// Catalog

async fn create_schema(State(st): S, Extension(me): Me, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let schema: Schema = body(&raw)?;
    Ok(created(st.run(move |p| p.create_schema(schema)).await?))
}

async fn get_schema(State(st): S, Path(id): Path<String>) -> ApiResult<Json<Schema>> {
    Ok(Json(st.run(move |p| p.schema(&id)).await?))
}

async fn upsert_annotator(State(st): S, Extension(me): Me, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let annotator: Annotator = body(&raw)?;
    Ok(created(st.run(move |p| p.upsert_annotator(annotator)).await?))
}

async fn get_annotator(State(st): S, Path(id): Path<String>) -> ApiResult<Json<Annotator>> {
    Ok(Json(st.run(move |p| p.annotator(&id)).await?))
}

#[derive(Deserialize)]
struct TeamBody {
    name: String,
    #[serde(default)]
    members: Vec<String>,
}

async fn create_team(State(st): S, Extension(me): Me, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let team: TeamBody = body(&raw)?;
    Ok(created(st.run(move |p| p.create_team(&team.name, &team.members)).await?))
}

async fn get_team(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Response> {
    me.require_manager()?;
    Ok(Json(st.run(move |p| p.team(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct MemberBody {
    annotator_id: String,
}

async fn add_member(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let member: MemberBody = body(&raw)?;
    Ok(Json(st.run(move |p| p.add_team_member(&id, &member.annotator_id)).await?).into_response())
}

// Jobs and tasks

async fn create_job(State(st): S, Extension(me): Me, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let spec: JobSpec = body(&raw)?;
    let (job, plan) = st.run(move |p| p.create_job(&spec)).await?;
    Ok(created(json!({ "job": job, "plan": plan })))
}

async fn get_job(State(st): S, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.run(move |p| p.job(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct StateBody {
    state: JobState,
}

async fn set_job_state(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let StateBody { state } = body(&raw)?;
    Ok(Json(st.run(move |p| p.set_job_state(&id, state)).await?).into_response())
}

async fn list_tasks(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Json<Vec<Task>>> {
    me.require_manager()?;
    Ok(Json(st.run(move |p| p.tasks(&id)).await?))
}

#[derive(Deserialize)]
struct AssignBody {
    annotator_id: String,
    example_id: String,
}

async fn assign_task(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let a: AssignBody = body(&raw)?;
    Ok(created(st.run(move |p| p.assign_task(&id, &a.annotator_id, &a.example_id)).await?))
}

/// A leased task with everything the annotation view needs.
#[derive(Serialize)]
struct TaskView {
    task: Task,
    example: Example,
    preannotations: Vec<PreAnnotation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    context: Option<ContextGroup>,
}

async fn next_task(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Response> {
    let annotator = me.id.clone();
    let view = st
        .run(move |p| {
            let Some(task) = p.next_task(&id, &annotator)? else {
                return Ok(None);
            };
            let job = p.job(&id)?;
            let dataset = p.dataset(&job.dataset_id)?;
            let example = p.example(&job.dataset_id, &task.example_id)?;
            let preannotations = p.preannotations(&id, Some(&task.example_id))?;
            let context = match dataset.context_config {
                Some(_) => Some(p.context_group(&job.dataset_id, &task.example_id)?),
                None => None,
            };
            Ok(Some(TaskView { task, example, preannotations, context }))
        })
        .await?;
    Ok(match view {
        Some(view) => Json(view).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn get_task(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Json<Task>> {
    let task = st.run(move |p| p.task(&id)).await?;
    if !me.is_manager() && task.annotator_id != me.id {
        return Err(ApiError::Forbidden(format!("task {} belongs to another annotator", task.id)));
    }
    Ok(Json(task))
}

async fn submit_task(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let submission: Submission = body(&raw)?;
    let annotator = me.id.clone();
    Ok(Json(st.run(move |p| p.submit_task(&id, &annotator, &submission)).await?).into_response())
}

async fn revoke_task(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Json<Task>> {
    me.require_manager()?;
    Ok(Json(st.run(move |p| p.revoke_lease(&id)).await?))
}

async fn reprioritize(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
) -> ApiResult<Json<BTreeMap<String, i64>>> {
    me.require_manager()?;
    Ok(Json(st.run(move |p| p.reprioritize(&id)).await?))
}

// Review

#[derive(Deserialize)]
struct ScopeQuery {
    #[serde(default)]
    scope: Scope,
}

async fn review_example(
    State(st): S,
    Extension(me): Me,
    Path((id, ex)): Path<(String, String)>,
    q: Result<Query<ScopeQuery>, QueryRejection>,
) -> ApiResult<Response> {
    me.require_manager()?;
    let scope = query(q)?.scope;
    Ok(Json(st.run(move |p| p.consolidate(&id, &ex, scope)).await?).into_response())
}

async fn get_ideal(State(st): S, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(st.run(move |p| p.ideal(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct JobRef {
    job_id: String,
}

async fn accept_ideal(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let JobRef { job_id } = body(&raw)?;
    let reviewer = me.id.clone();
    Ok(Json(st.run(move |p| p.accept_ideal(&job_id, &id, &reviewer)).await?).into_response())
}

async fn reject_ideal(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let JobRef { job_id } = body(&raw)?;
    let reviewer = me.id.clone();
    Ok(Json(st.run(move |p| p.reject_ideal(&job_id, &id, &reviewer)).await?).into_response())
}

async fn list_judgments(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Response> {
    me.require_manager()?;
    Ok(Json(st.run(move |p| p.judgments(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct ThresholdBody {
    threshold: f64,
}

async fn batch_accept(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let ThresholdBody { threshold } = body(&raw)?;
    let reviewer = me.id.clone();
    let accepted = st.run(move |p| p.batch_accept_threshold(&id, threshold, &reviewer)).await?;
    Ok(Json(json!({ "accepted": accepted })).into_response())
}

async fn lexical_groups(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
    q: Result<Query<ScopeQuery>, QueryRejection>,
) -> ApiResult<Response> {
    me.require_manager()?;
    let scope = query(q)?.scope;
    Ok(Json(st.run(move |p| p.lexical_groups(&id, scope)).await?).into_response())
}

#[derive(Deserialize)]
struct LexicalBody {
    surface: String,
    tag: String,
    verdict: Verdict,
    #[serde(default)]
    scope: Scope,
}

async fn lexical_review(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let b: LexicalBody = body(&raw)?;
    let reviewer = me.id.clone();
    let judgments = st
        .run(move |p| p.batch_review_lexical(&id, &b.surface, &b.tag, b.scope, b.verdict, &reviewer))
        .await?;
    Ok(Json(json!({ "judgments": judgments })).into_response())
}

// Metrics

#[derive(Deserialize)]
struct MetricsQuery {
    source: Option<String>,
}

#[derive(Serialize)]
struct MetricsReport {
    format_version: u32,
    job_id: String,
    pairwise: Vec<PairAgreement>,
    /// Absent unless the job is single-label classification.
    classification: Option<ClassAgreement>,
    /// Present when `source` was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    precision_recall: Option<PrecisionRecall>,
}

async fn metrics(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
    q: Result<Query<MetricsQuery>, QueryRejection>,
) -> ApiResult<Json<MetricsReport>> {
    me.require_manager()?;
    let source = query(q)?.source;
    let report = st
        .run(move |p| {
            let pairwise = p.all_pairwise_span_agreement(&id)?;
            let classification = match p.classification_agreement(&id) {
                Ok(c) => Some(c),
                Err(Error::WrongJobKind(_)) => None,
                Err(e) => return Err(e),
            };
            let precision_recall = match source {
                Some(s) => Some(p.precision_recall(&id, &s)?),
                None => None,
            };
            Ok(MetricsReport { format_version: FORMAT_VERSION, job_id: id, pairwise, classification, precision_recall })
        })
        .await?;
    Ok(Json(report))
}

#[derive(Deserialize)]
struct ProgressQuery {
    window_minutes: Option<u64>,
}

async fn progress(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
    q: Result<Query<ProgressQuery>, QueryRejection>,
) -> ApiResult<Response> {
    me.require_manager()?;
    let window = query(q)?.window_minutes.unwrap_or(DEFAULT_WINDOW_MINUTES);
    Ok(Json(st.run(move |p| p.progress(&id, window)).await?).into_response())
}

// Pre-annotations

#[derive(Deserialize)]
#[serde(untagged)]
enum RowsBody {
    Bare(Vec<PreAnnotationRow>),
    Wrapped { rows: Vec<PreAnnotationRow> },
}

async fn upload_preannotations(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
    raw: Bytes,
) -> ApiResult<Response> {
    me.require_manager()?;
    let rows = match body::<RowsBody>(&raw)? {
        RowsBody::Bare(rows) | RowsBody::Wrapped { rows } => rows,
    };
    Ok(created(st.run(move |p| p.upload_preannotations(&id, &rows)).await?))
}

#[derive(Deserialize)]
struct ExampleFilter {
    example_id: Option<String>,
}

async fn list_preannotations(
    State(st): S,
    Path(id): Path<String>,
    q: Result<Query<ExampleFilter>, QueryRejection>,
) -> ApiResult<Json<Vec<PreAnnotation>>> {
    let example = query(q)?.example_id;
    Ok(Json(st.run(move |p| p.preannotations(&id, example.as_deref())).await?))
}

#[derive(Deserialize)]
struct RulesBody {
    rules: Vec<RegexRule>,
}

async fn run_regex(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let RulesBody { rules } = body(&raw)?;
    Ok(Json(st.run(move |p| p.run_regex_preannotator(&id, &rules)).await?).into_response())
}

// Export and import

#[derive(Deserialize)]
struct ExportQuery {
    filter: Option<String>,
}

async fn export_job(
    State(st): S,
    Extension(me): Me,
    Path(id): Path<String>,
    q: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    me.require_manager()?;
    let filter = match query(q)?.filter {
        None => ExportFilter::All,
        Some(f) => ExportFilter::parse(&f).ok_or_else(|| ApiError::BadRequest(format!("unknown filter {f:?}")))?,
    };
    let text = st.run(move |p| p.export_job(&id, filter)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn import_job(State(st): S, Extension(me): Me, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    me.require_manager()?;
    let text = String::from_utf8(raw.to_vec()).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    Ok(Json(st.run(move |p| p.import_job(&id, &text)).await?).into_response())
}

async fn wipe_job(State(st): S, Extension(me): Me, Path(id): Path<String>) -> ApiResult<Response> {
    me.require_manager()?;
    let removed = st.run(move |p| p.wipe_job_annotations(&id)).await?;
    Ok(Json(json!({ "removed": removed })).into_response())
}
