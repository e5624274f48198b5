//! Machine-suggested annotations: bulk upload and regex rules.

use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::interning::{intern, PayloadInput};
use crate::model::{normalize_span, Job, JobState, PreAnnotation, PreAnnotationOrigin, PreAnnotationState};
use crate::search::{search, SearchQuery, TrigramIndex};
use crate::store::{FaultPoint, StoredIdeal, Tx};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreAnnotationRow {
    pub example_id: String,
    pub payload: PayloadInput,
    pub origin: PreAnnotationOrigin,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreAnnotationCounts {
    /// Rows or matches considered.
    pub received: usize,
    /// New pending pre-annotations.
    pub created: usize,
    /// Rows that collapsed onto an existing pre-annotation for the same ideal.
    pub duplicates: usize,
    /// Regex matches that were only whitespace.
    #[serde(default)]
    pub skipped: usize,
}

/// Inserts a pending pre-annotation unless one already exists for the ideal.
fn insert_pending(tx: &Tx<'_>, job_id: &str, ideal_id: &str, origin: &PreAnnotationOrigin) -> Result<bool> {
    let (kind, origin_id) = origin.parts();
    let id = tx.new_id();
    let changed = tx.conn.execute(
        "INSERT INTO preannotations (id, ideal_id, job_id, origin_kind, origin_id, state)
         VALUES (?1, ?2, ?3, ?4, ?5, 'pending') ON CONFLICT (job_id, ideal_id) DO NOTHING",
        params![id, ideal_id, job_id, kind, origin_id],
    )?;
    Ok(changed == 1)
}

fn require_open(job: &Job) -> Result<()> {
    if job.state != JobState::Open {
        return Err(Error::JobNotOpen(job.id.clone()));
    }
    Ok(())
}

pub(crate) fn upload(tx: &Tx<'_>, job: &Job, rows: &[PreAnnotationRow]) -> Result<PreAnnotationCounts> {
    require_open(job)?;
    let schema = tx.schema(&job.schema_id)?;
    let mut diagnostics = Vec::new();
    let mut counts = PreAnnotationCounts { received: rows.len(), ..Default::default() };
    for (i, row) in rows.iter().enumerate() {
        let example = match tx.example(&job.dataset_id, &row.example_id) {
            Ok((example, _)) => example,
            Err(Error::UnknownExample(_)) => {
                diagnostics.push(Diagnostic::new(format!("rows[{i}].example_id"), "unknown example"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let ideal_id = match intern(tx, &job.dataset_id, &example, &schema, &row.payload) {
            Ok(id) => id,
            Err(Error::InvalidPayload(msg)) => {
                diagnostics.push(Diagnostic::new(format!("rows[{i}].payload"), msg));
                continue;
            }
            Err(e @ (Error::Span(_) | Error::UnknownIdeal(_))) => {
                diagnostics.push(Diagnostic::new(format!("rows[{i}].payload"), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        if !diagnostics.is_empty() {
            continue;
        }
        if insert_pending(tx, &job.id, &ideal_id, &row.origin)? {
            counts.created += 1;
        } else {
            counts.duplicates += 1;
        }
        if i == 0 {
            tx.checkpoint(FaultPoint::PreannotationUploadMidway)?;
        }
    }
    if !diagnostics.is_empty() {
        return Err(Error::MalformedRows(diagnostics));
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexRule {
    /// Recorded as the pre-annotation origin; defaults to the pattern.
    #[serde(default)]
    pub id: Option<String>,
    pub pattern: String,
    pub tag: String,
    #[serde(default)]
    pub case_insensitive: bool,
}

impl RegexRule {
    pub fn new(pattern: impl Into<String>, tag: impl Into<String>) -> Self {
        Self { id: None, pattern: pattern.into(), tag: tag.into(), case_insensitive: false }
    }

    pub fn rule_id(&self) -> &str {
        self.id.as_deref().unwrap_or(&self.pattern)
    }
}

pub(crate) fn run_regex(tx: &Tx<'_>, job: &Job, index: &TrigramIndex, rules: &[RegexRule]) -> Result<PreAnnotationCounts> {
    require_open(job)?;
    let schema = tx.schema(&job.schema_id)?;
    for (i, rule) in rules.iter().enumerate() {
        crate::search::compile(&rule.pattern, rule.case_insensitive)
            .map_err(|e| Error::InvalidRegex(format!("rules[{i}]: {e}")))?;
        if !schema.has_tag(&rule.tag) {
            return Err(Error::InvalidPayload(format!("rules[{i}]: unknown tag {:?}", rule.tag)));
        }
    }
    let mut counts = PreAnnotationCounts::default();
    for rule in rules {
        let query = SearchQuery::new(&rule.pattern).case_insensitive(rule.case_insensitive).unlimited();
        let origin = PreAnnotationOrigin::Rule(rule.rule_id().to_string());
        for hit in search(index, &query)?.hits {
            let (example, _) = tx.example(&job.dataset_id, &hit.example_id)?;
            for span in hit.spans {
                counts.received += 1;
                if normalize_span(&example.content, span.start, span.end).is_err() {
                    counts.skipped += 1;
                    continue;
                }
                let payload = PayloadInput::Span { start: span.start, end: span.end, tag: rule.tag.clone() };
                let ideal_id = intern(tx, &job.dataset_id, &example, &schema, &payload)?;
                if insert_pending(tx, &job.id, &ideal_id, &origin)? {
                    counts.created += 1;
                } else {
                    counts.duplicates += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Pre-annotations of the job, optionally limited to one example.
pub(crate) fn list(tx: &Tx<'_>, job_id: &str, example_id: Option<&str>) -> Result<Vec<PreAnnotation>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT p.id, p.origin_kind, p.origin_id, p.state, i.id, i.dataset_id, i.example_id, i.canonical
         FROM preannotations p JOIN ideals i ON i.id = p.ideal_id
         WHERE p.job_id = ?1 AND (?2 IS NULL OR i.example_id = ?2)
         ORDER BY i.example_id, i.canonical",
    )?;
    let mut rows = stmt.query(params![job_id, example_id])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let ideal = StoredIdeal::from_row_at(row, 4)?;
        let state: String = row.get(3)?;
        out.push(PreAnnotation {
            id: row.get(0)?,
            ideal_id: ideal.id,
            job_id: job_id.to_string(),
            example_id: ideal.example_id,
            payload: ideal.payload,
            origin: PreAnnotationOrigin::from_parts(&row.get::<_, String>(1)?, row.get(2)?),
            state: PreAnnotationState::parse(&state).unwrap_or(PreAnnotationState::Pending),
        });
    }
    Ok(out)
}
