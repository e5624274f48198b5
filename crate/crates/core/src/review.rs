//! Review and adjudication.
//!
//! Judgments come in two flavours. Primary verdicts (manual, threshold
//! batch, lexical batch) are what reviewers decide. Transitive rejections
//! are derived: an ideal without a primary verdict that conflicts with an
//! accepted ideal is rejected, citing the earliest such accepted ideal.
//! Every operation below keeps that rule true, so replaying the primary
//! verdicts in order rebuilds the same judgment state.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rusqlite::{params, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use crate::clock::format_timestamp;
use crate::error::{AcceptBlocker, Error, Result};
use crate::interning::conflicting_in_job;
use crate::model::{
    char_slice, payloads_conflict, AnnotationIdeal, AnnotatorKind, IdealPayload, Job, JudgmentCause,
    ReviewJudgment, Schema, Scope, Verdict,
};
use crate::store::{FaultPoint, StoredIdeal, Tx};

const JUDGMENT_COLUMNS: &str = "id, job_id, ideal_id, reviewer_id, verdict, cause, caused_by, created_at, live";

fn judgment_from_row(row: &Row<'_>) -> rusqlite::Result<ReviewJudgment> {
    let verdict: String = row.get(4)?;
    let cause: String = row.get(5)?;
    let bad = |i: usize, v: &str| {
        rusqlite::Error::FromSqlConversionFailure(i, rusqlite::types::Type::Text, format!("bad value {v:?}").into())
    };
    Ok(ReviewJudgment {
        id: row.get(0)?,
        job_id: row.get(1)?,
        ideal_id: row.get(2)?,
        reviewer_id: row.get(3)?,
        verdict: Verdict::parse(&verdict).ok_or_else(|| bad(4, &verdict))?,
        cause: JudgmentCause::parse(&cause).ok_or_else(|| bad(5, &cause))?,
        caused_by: row.get(6)?,
        created_at: format_timestamp(row.get(7)?),
        live: row.get::<_, i64>(8)? == 1,
    })
}

pub(crate) fn live_judgment(tx: &Tx<'_>, job_id: &str, ideal_id: &str) -> Result<Option<ReviewJudgment>> {
    let mut stmt = tx.conn.prepare_cached(&format!(
        "SELECT {JUDGMENT_COLUMNS} FROM judgments WHERE job_id = ?1 AND ideal_id = ?2 AND live = 1"
    ))?;
    Ok(stmt.query_row([job_id, ideal_id], judgment_from_row).optional()?)
}

/// Every judgment ever made on the ideal in this job, oldest first.
pub(crate) fn judgment_trail(tx: &Tx<'_>, job_id: &str, ideal_id: &str) -> Result<Vec<ReviewJudgment>> {
    let mut stmt = tx.conn.prepare_cached(&format!(
        "SELECT {JUDGMENT_COLUMNS} FROM judgments WHERE job_id = ?1 AND ideal_id = ?2 ORDER BY seq"
    ))?;
    let rows = stmt.query_map([job_id, ideal_id], judgment_from_row)?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

/// Live judgments of the job keyed by ideal id.
pub(crate) fn live_judgments(tx: &Tx<'_>, job_id: &str) -> Result<HashMap<String, ReviewJudgment>> {
    let mut stmt = tx
        .conn
        .prepare_cached(&format!("SELECT {JUDGMENT_COLUMNS} FROM judgments WHERE job_id = ?1 AND live = 1"))?;
    let rows = stmt.query_map([job_id], judgment_from_row)?;
    let mut out = HashMap::new();
    for j in rows {
        let j = j?;
        out.insert(j.ideal_id.clone(), j);
    }
    Ok(out)
}

fn record(
    tx: &Tx<'_>,
    job_id: &str,
    ideal_id: &str,
    reviewer_id: &str,
    verdict: Verdict,
    cause: JudgmentCause,
    caused_by: Option<&str>,
) -> Result<ReviewJudgment> {
    tx.conn.execute(
        "UPDATE judgments SET live = 0 WHERE job_id = ?1 AND ideal_id = ?2 AND live = 1",
        [job_id, ideal_id],
    )?;
    let id = tx.new_id();
    tx.conn.execute(
        "INSERT INTO judgments (id, job_id, ideal_id, reviewer_id, verdict, cause, caused_by, created_at, live)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, 1)",
        params![id, job_id, ideal_id, reviewer_id, verdict.as_str(), cause.as_str(), caused_by, tx.now_ms()],
    )?;
    let mut stmt = tx.conn.prepare_cached(&format!("SELECT {JUDGMENT_COLUMNS} FROM judgments WHERE id = ?1"))?;
    Ok(stmt.query_row([&id], judgment_from_row)?)
}

fn ideal_in_job(tx: &Tx<'_>, job: &Job, ideal_id: &str) -> Result<StoredIdeal> {
    let ideal = tx.ideal(ideal_id)?;
    let has_event = tx
        .conn
        .query_row(
            "SELECT 1 FROM events e JOIN tasks t ON t.id = e.task_id
             WHERE e.ideal_id = ?1 AND t.job_id = ?2 LIMIT 1",
            [ideal_id, &job.id],
            |_| Ok(()),
        )
        .optional()?;
    if ideal.dataset_id != job.dataset_id || has_event.is_none() {
        return Err(Error::UnknownIdeal(ideal_id.to_string()));
    }
    Ok(ideal)
}

/// Conflicting ideals in the job, found via the per-example index.
fn conflicts_of(tx: &Tx<'_>, job: &Job, schema: &Schema, ideal: &StoredIdeal) -> Result<Vec<String>> {
    conflicting_in_job(tx, &job.id, &job.dataset_id, &ideal.id, &ideal.example_id, &ideal.payload, schema)
}

/// Order in which currently accepted ideals were accepted.
fn accept_seq(tx: &Tx<'_>, job_id: &str, ideal_id: &str) -> Result<Option<i64>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT seq FROM judgments WHERE job_id = ?1 AND ideal_id = ?2 AND live = 1 AND verdict = 'accepted'",
    )?;
    Ok(stmt.query_row([job_id, ideal_id], |r| r.get(0)).optional()?)
}

/// The earliest-accepted live accepted ideal among `ids`.
fn earliest_accepted(tx: &Tx<'_>, job_id: &str, ids: &[String]) -> Result<Option<String>> {
    let mut best: Option<(i64, &String)> = None;
    for id in ids {
        if let Some(seq) = accept_seq(tx, job_id, id)? {
            if best.is_none_or(|(s, _)| seq < s) {
                best = Some((seq, id));
            }
        }
    }
    Ok(best.map(|(_, id)| id.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptOutcome {
    pub judgment: ReviewJudgment,
    /// Ideals newly rejected because they conflict with the accepted one.
    pub transitive_rejections: Vec<ReviewJudgment>,
}

pub(crate) fn accept(
    tx: &Tx<'_>,
    job: &Job,
    schema: &Schema,
    ideal_id: &str,
    reviewer_id: &str,
    cause: JudgmentCause,
) -> Result<AcceptOutcome> {
    let ideal = ideal_in_job(tx, job, ideal_id)?;
    if let Some(live) = live_judgment(tx, &job.id, ideal_id)? {
        if live.verdict == Verdict::Accepted {
            return Ok(AcceptOutcome { judgment: live, transitive_rejections: Vec::new() });
        }
    }
    let conflicts = conflicts_of(tx, job, schema, &ideal)?;
    let mut blockers = Vec::new();
    let mut unjudged = Vec::new();
    for other in &conflicts {
        match live_judgment(tx, &job.id, other)? {
            Some(j) if j.verdict == Verdict::Accepted => blockers.push(AcceptBlocker {
                ideal_id: ideal_id.to_string(),
                accepted_ideal_id: other.clone(),
            }),
            Some(_) => {}
            None => unjudged.push(other),
        }
    }
    if !blockers.is_empty() {
        return Err(Error::ConflictsWithAccepted(blockers));
    }
    let judgment = record(tx, &job.id, ideal_id, reviewer_id, Verdict::Accepted, cause, None)?;
    let mut transitive_rejections = Vec::with_capacity(unjudged.len());
    for other in unjudged {
        transitive_rejections.push(record(
            tx,
            &job.id,
            other,
            reviewer_id,
            Verdict::Rejected,
            JudgmentCause::Transitive,
            Some(ideal_id),
        )?);
    }
    Ok(AcceptOutcome { judgment, transitive_rejections })
}

pub(crate) fn reject(
    tx: &Tx<'_>,
    job: &Job,
    schema: &Schema,
    ideal_id: &str,
    reviewer_id: &str,
    cause: JudgmentCause,
) -> Result<ReviewJudgment> {
    ideal_in_job(tx, job, ideal_id)?;
    let live = live_judgment(tx, &job.id, ideal_id)?;
    if let Some(j) = &live {
        if j.verdict == Verdict::Rejected && j.cause != JudgmentCause::Transitive {
            return Ok(j.clone());
        }
    }
    let judgment = record(tx, &job.id, ideal_id, reviewer_id, Verdict::Rejected, cause, None)?;
    if live.is_some_and(|j| j.verdict == Verdict::Accepted) {
        revoke_transitive(tx, job, schema, ideal_id, reviewer_id)?;
    }
    Ok(judgment)
}

/// Withdraws the rejections an accepted ideal caused, re-deriving each from
/// whatever accepted ideals still conflict with it.
fn revoke_transitive(tx: &Tx<'_>, job: &Job, schema: &Schema, cause_id: &str, reviewer_id: &str) -> Result<()> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT ideal_id FROM judgments WHERE job_id = ?1 AND caused_by = ?2 AND live = 1 ORDER BY seq",
    )?;
    let affected: Vec<String> =
        stmt.query_map([&job.id, cause_id], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    for id in affected {
        tx.conn.execute(
            "UPDATE judgments SET live = 0 WHERE job_id = ?1 AND ideal_id = ?2 AND live = 1",
            [&job.id, &id],
        )?;
        let ideal = tx.ideal(&id)?;
        let conflicts = conflicts_of(tx, job, schema, &ideal)?;
        if let Some(by) = earliest_accepted(tx, &job.id, &conflicts)? {
            record(tx, &job.id, &id, reviewer_id, Verdict::Rejected, JudgmentCause::Transitive, Some(&by))?;
        }
    }
    Ok(())
}

/// Called when ideals gain their first event in a job after review began:
/// an unjudged ideal conflicting with an accepted one is rejected at once.
pub(crate) fn apply_existing_verdicts(tx: &Tx<'_>, job: &Job, schema: &Schema, ideal_ids: &[String]) -> Result<()> {
    for id in ideal_ids {
        if live_judgment(tx, &job.id, id)?.is_some() {
            continue;
        }
        let ideal = tx.ideal(id)?;
        let conflicts = conflicts_of(tx, job, schema, &ideal)?;
        if let Some(by) = earliest_accepted(tx, &job.id, &conflicts)? {
            let reviewer: String = tx.conn.query_row(
                "SELECT reviewer_id FROM judgments WHERE job_id = ?1 AND ideal_id = ?2 AND live = 1",
                [&job.id, &by],
                |r| r.get(0),
            )?;
            record(tx, &job.id, id, &reviewer, Verdict::Rejected, JudgmentCause::Transitive, Some(&by))?;
        }
    }
    Ok(())
}

/// Support of one ideal within a job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealSupport {
    pub ideal: AnnotationIdeal,
    pub event_count: usize,
    pub supporting_annotators: Vec<String>,
    pub seen_count: usize,
    pub first_event_at: String,
    #[serde(skip)]
    first_event_key: (i64, i64),
}

/// Per-ideal support and per-example seen counts for a job, limited to
/// annotators in `scope`.
pub(crate) fn support_table(tx: &Tx<'_>, job_id: &str, scope: Scope) -> Result<Vec<IdealSupport>> {
    let seen = seen_counts(tx, job_id, scope)?;
    let mut stmt = tx.conn.prepare_cached(
        "SELECT i.id, i.dataset_id, i.example_id, i.canonical, t.annotator_id, a.kind, e.created_at, e.rowid
         FROM events e
         JOIN tasks t ON t.id = e.task_id
         JOIN annotators a ON a.id = t.annotator_id
         JOIN ideals i ON i.id = e.ideal_id
         WHERE t.job_id = ?1
         ORDER BY e.created_at, e.rowid",
    )?;
    let mut rows = stmt.query([job_id])?;
    // (ideal, events, supporters, first event key)
    type Entry = (StoredIdeal, usize, BTreeSet<String>, (i64, i64));
    let mut by_ideal: BTreeMap<String, Entry> = BTreeMap::new();
    while let Some(row) = rows.next()? {
        let kind: String = row.get(5)?;
        if !scope.includes(AnnotatorKind::parse(&kind).unwrap_or_default()) {
            continue;
        }
        let ideal = StoredIdeal::from_row(row)?;
        let annotator: String = row.get(4)?;
        let key = (row.get::<_, i64>(6)?, row.get::<_, i64>(7)?);
        let entry = by_ideal.entry(ideal.id.clone()).or_insert_with(|| (ideal, 0, BTreeSet::new(), key));
        entry.1 += 1;
        entry.2.insert(annotator);
    }
    Ok(by_ideal
        .into_values()
        .map(|(ideal, events, annotators, first)| IdealSupport {
            seen_count: seen.get(&ideal.example_id).copied().unwrap_or(0),
            ideal: ideal.to_ideal(),
            event_count: events,
            supporting_annotators: annotators.into_iter().collect(),
            first_event_at: format_timestamp(first.0),
            first_event_key: first,
        })
        .collect())
}

/// Number of in-scope annotators with a submitted task on each example.
pub(crate) fn seen_counts(tx: &Tx<'_>, job_id: &str, scope: Scope) -> Result<HashMap<String, usize>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT t.example_id, a.kind FROM tasks t JOIN annotators a ON a.id = t.annotator_id
         WHERE t.job_id = ?1 AND t.state = 'submitted'",
    )?;
    let mut out: HashMap<String, usize> = HashMap::new();
    let rows = stmt.query_map([job_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
    for row in rows {
        let (example, kind) = row?;
        if scope.includes(AnnotatorKind::parse(&kind).unwrap_or_default()) {
            *out.entry(example).or_default() += 1;
        }
    }
    Ok(out)
}

/// Higher support ratio first, then earliest first event, then id.
fn threshold_order(a: &IdealSupport, b: &IdealSupport) -> Ordering {
    let lhs = a.supporting_annotators.len() as u128 * b.seen_count as u128;
    let rhs = b.supporting_annotators.len() as u128 * a.seen_count as u128;
    rhs.cmp(&lhs)
        .then(a.first_event_key.cmp(&b.first_event_key))
        .then(a.ideal.id.cmp(&b.ideal.id))
}

pub(crate) fn batch_accept_threshold(
    tx: &Tx<'_>,
    job: &Job,
    schema: &Schema,
    threshold: f64,
    reviewer_id: &str,
) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let live = live_judgments(tx, &job.id)?;
    let mut eligible: Vec<IdealSupport> = support_table(tx, &job.id, Scope::All)?
        .into_iter()
        .filter(|s| !live.contains_key(&s.ideal.id))
        .filter(|s| s.seen_count > 0 && s.supporting_annotators.len() as f64 / s.seen_count as f64 >= threshold)
        .collect();
    eligible.sort_by(threshold_order);
    let mut accepted = 0;
    for support in eligible {
        if live_judgment(tx, &job.id, &support.ideal.id)?.is_some() {
            continue;
        }
        match accept(tx, job, schema, &support.ideal.id, reviewer_id, JudgmentCause::ThresholdBatch) {
            Ok(_) => accepted += 1,
            // Unreachable while unjudged ideals never conflict with accepted
            // ones; skipping keeps the batch total rather than aborting it.
            Err(Error::ConflictsWithAccepted(_)) => continue,
            Err(e) => return Err(e),
        }
        if accepted == 1 {
            tx.checkpoint(FaultPoint::BatchAcceptMidway)?;
        }
    }
    Ok(accepted)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewGroup {
    pub ideal: AnnotationIdeal,
    /// Surface text for span ideals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
    pub event_count: usize,
    pub supporting_annotators: Vec<String>,
    pub seen_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgment: Option<ReviewJudgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidatedView {
    pub example_id: String,
    pub content: String,
    pub seen_count: usize,
    pub seen_by: Vec<String>,
    pub groups: Vec<ReviewGroup>,
    pub conflicts: Vec<(String, String)>,
}

pub(crate) fn consolidate(tx: &Tx<'_>, job: &Job, schema: &Schema, example_id: &str, scope: Scope) -> Result<ConsolidatedView> {
    let (example, _) = tx.example(&job.dataset_id, example_id).map_err(|e| match e {
        Error::UnknownExample(_) => Error::ExampleNotInJob { job: job.id.clone(), example: example_id.into() },
        other => other,
    })?;
    let mut stmt = tx.conn.prepare_cached(
        "SELECT t.annotator_id, a.kind FROM tasks t JOIN annotators a ON a.id = t.annotator_id
         WHERE t.job_id = ?1 AND t.example_id = ?2 AND t.state = 'submitted' ORDER BY t.annotator_id",
    )?;
    let seen_by: Vec<String> = stmt
        .query_map([&job.id, example_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?
        .collect::<rusqlite::Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, kind)| scope.includes(AnnotatorKind::parse(kind).unwrap_or_default()))
        .map(|(id, _)| id)
        .collect();

    let mut stmt = tx.conn.prepare_cached(
        "SELECT i.id, i.dataset_id, i.example_id, i.canonical, t.annotator_id, a.kind
         FROM events e
         JOIN tasks t ON t.id = e.task_id
         JOIN annotators a ON a.id = t.annotator_id
         JOIN ideals i ON i.id = e.ideal_id
         WHERE t.job_id = ?1 AND t.example_id = ?2
         ORDER BY i.id",
    )?;
    let mut rows = stmt.query([&job.id, example_id])?;
    let mut by_ideal: BTreeMap<String, (StoredIdeal, usize, BTreeSet<String>)> = BTreeMap::new();
    while let Some(row) = rows.next()? {
        let kind: String = row.get(5)?;
        if !scope.includes(AnnotatorKind::parse(&kind).unwrap_or_default()) {
            continue;
        }
        let ideal = StoredIdeal::from_row(row)?;
        let entry = by_ideal.entry(ideal.id.clone()).or_insert_with(|| (ideal, 0, BTreeSet::new()));
        entry.1 += 1;
        entry.2.insert(row.get(4)?);
    }
    let mut groups = Vec::with_capacity(by_ideal.len());
    for (id, (ideal, events, annotators)) in by_ideal {
        let surface = match &ideal.payload {
            IdealPayload::Span { start, end, .. } => Some(char_slice(&example.content, *start, *end).to_string()),
            _ => None,
        };
        groups.push(ReviewGroup {
            ideal: ideal.to_ideal(),
            surface,
            event_count: events,
            supporting_annotators: annotators.into_iter().collect(),
            seen_count: seen_by.len(),
            judgment: live_judgment(tx, &job.id, &id)?,
        });
    }
    let mut conflicts = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if payloads_conflict(&a.ideal.payload, &b.ideal.payload, schema.classification_mode) {
                conflicts.push((a.ideal.id.clone(), b.ideal.id.clone()));
            }
        }
    }
    Ok(ConsolidatedView {
        example_id: example.id,
        content: example.content,
        seen_count: seen_by.len(),
        seen_by,
        groups,
        conflicts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalGroup {
    pub surface: String,
    pub tag: String,
    pub ideal_ids: Vec<String>,
    pub event_count: usize,
}

pub(crate) fn lexical_groups(tx: &Tx<'_>, job: &Job, scope: Scope) -> Result<Vec<LexicalGroup>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT i.id, i.span_start, i.span_end, i.label, x.content, a.kind
         FROM events e
         JOIN tasks t ON t.id = e.task_id
         JOIN annotators a ON a.id = t.annotator_id
         JOIN ideals i ON i.id = e.ideal_id
         JOIN examples x ON x.dataset_id = i.dataset_id AND x.id = i.example_id
         WHERE t.job_id = ?1 AND i.kind = 'span'",
    )?;
    let mut rows = stmt.query([&job.id])?;
    let mut groups: BTreeMap<(String, String), (BTreeSet<String>, usize)> = BTreeMap::new();
    while let Some(row) = rows.next()? {
        let kind: String = row.get(5)?;
        if !scope.includes(AnnotatorKind::parse(&kind).unwrap_or_default()) {
            continue;
        }
        let id: String = row.get(0)?;
        let start = row.get::<_, i64>(1)? as usize;
        let end = row.get::<_, i64>(2)? as usize;
        let tag: String = row.get(3)?;
        let content: String = row.get(4)?;
        let surface = char_slice(&content, start, end).to_string();
        let entry = groups.entry((surface, tag)).or_default();
        entry.0.insert(id);
        entry.1 += 1;
    }
    let mut out: Vec<LexicalGroup> = groups
        .into_iter()
        .map(|((surface, tag), (ids, count))| LexicalGroup {
            surface,
            tag,
            ideal_ids: ids.into_iter().collect(),
            event_count: count,
        })
        .collect();
    // Stable sort keeps (surface, tag) order among equal counts.
    out.sort_by_key(|g| std::cmp::Reverse(g.event_count));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn batch_review_lexical(
    tx: &Tx<'_>,
    job: &Job,
    schema: &Schema,
    surface: &str,
    tag: &str,
    scope: Scope,
    verdict: Verdict,
    reviewer_id: &str,
) -> Result<Vec<ReviewJudgment>> {
    let Some(group) = lexical_groups(tx, job, scope)?.into_iter().find(|g| g.surface == surface && g.tag == tag)
    else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    match verdict {
        Verdict::Rejected => {
            for (i, id) in group.ideal_ids.iter().enumerate() {
                out.push(reject(tx, job, schema, id, reviewer_id, JudgmentCause::LexicalBatch)?);
                if i == 0 {
                    tx.checkpoint(FaultPoint::LexicalReviewMidway)?;
                }
            }
        }
        Verdict::Accepted => {
            // Members blocked by an ideal accepted before this batch abort it.
            let mut blockers = Vec::new();
            for id in &group.ideal_ids {
                let ideal = tx.ideal(id)?;
                for other in conflicts_of(tx, job, schema, &ideal)? {
                    if live_judgment(tx, &job.id, &other)?.is_some_and(|j| j.verdict == Verdict::Accepted) {
                        blockers.push(AcceptBlocker { ideal_id: id.clone(), accepted_ideal_id: other });
                    }
                }
            }
            if !blockers.is_empty() {
                return Err(Error::ConflictsWithAccepted(blockers));
            }
            let mut accepted_here: HashSet<String> = HashSet::new();
            for id in &group.ideal_ids {
                match accept(tx, job, schema, id, reviewer_id, JudgmentCause::LexicalBatch) {
                    Ok(outcome) => {
                        accepted_here.insert(id.clone());
                        out.push(outcome.judgment);
                        out.extend(outcome.transitive_rejections);
                    }
                    // Overlapping members of the same group: the earlier one wins.
                    Err(Error::ConflictsWithAccepted(b))
                        if b.iter().all(|b| accepted_here.contains(&b.accepted_ideal_id)) => {}
                    Err(e) => return Err(e),
                }
                if accepted_here.len() == 1 && !out.is_empty() {
                    tx.checkpoint(FaultPoint::LexicalReviewMidway)?;
                }
            }
        }
    }
    Ok(out)
}

/// Ideals accepted in the job, with their supporting annotators.
pub(crate) fn accepted_ideals(tx: &Tx<'_>, job_id: &str) -> Result<Vec<String>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT ideal_id FROM judgments WHERE job_id = ?1 AND live = 1 AND verdict = 'accepted' ORDER BY ideal_id",
    )?;
    let rows = stmt.query_map([job_id], |r| r.get(0))?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}
