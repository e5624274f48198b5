//! JSONL export and import of a job's annotations.
//!
//! `all` mode writes one line per event, each carrying the full judgment
//! trail of its ideal, which is enough to restore the job's annotation
//! state after a wipe. `accepted` mode writes one line per accepted ideal.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::clock::{format_timestamp, parse_timestamp};
use crate::error::{Error, Result};
use crate::interning::intern_canonical;
use crate::model::{AnnotatorKind, EventSource, IdealPayload, ReviewJudgment, TaskState, Verdict};
use crate::review::judgment_trail;
use crate::store::{FaultPoint, Tx};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFilter {
    #[default]
    All,
    AcceptedOnly,
}

impl ExportFilter {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Self::All),
            "accepted" | "accepted-only" => Some(Self::AcceptedOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLine {
    pub format_version: u32,
    pub job_id: String,
    pub example_id: String,
    pub ideal_id: String,
    pub payload: IdealPayload,
    pub event_id: String,
    pub task_id: String,
    pub annotator_id: String,
    pub annotator_kind: AnnotatorKind,
    pub source: EventSource,
    pub created_at: String,
    pub judgments: Vec<ReviewJudgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedLine {
    pub format_version: u32,
    pub job_id: String,
    pub example_id: String,
    pub ideal_id: String,
    pub payload: IdealPayload,
    pub supporting_annotators: Vec<String>,
    pub judgments: Vec<ReviewJudgment>,
}

struct EventRow {
    ordinal: i64,
    canonical: String,
    created_ms: i64,
    line: EventLine,
}

fn event_rows(tx: &Tx<'_>, job_id: &str) -> Result<Vec<EventRow>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT x.ordinal, i.canonical, e.created_at, x.id, i.id, e.id, t.id, t.annotator_id, a.kind, e.source
         FROM events e
         JOIN tasks t ON t.id = e.task_id
         JOIN annotators a ON a.id = t.annotator_id
         JOIN ideals i ON i.id = e.ideal_id
         JOIN examples x ON x.dataset_id = i.dataset_id AND x.id = i.example_id
         WHERE t.job_id = ?1",
    )?;
    let mut rows = stmt.query([job_id])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let canonical: String = row.get(1)?;
        let created_ms: i64 = row.get(2)?;
        let kind: String = row.get(8)?;
        let source: String = row.get(9)?;
        out.push(EventRow {
            ordinal: row.get(0)?,
            created_ms,
            line: EventLine {
                format_version: FORMAT_VERSION,
                job_id: job_id.to_string(),
                example_id: row.get(3)?,
                ideal_id: row.get(4)?,
                payload: serde_json::from_str(&canonical)?,
                event_id: row.get(5)?,
                task_id: row.get(6)?,
                annotator_id: row.get(7)?,
                annotator_kind: AnnotatorKind::parse(&kind).unwrap_or_default(),
                source: EventSource::parse(&source).unwrap_or(EventSource::Annotator),
                created_at: format_timestamp(created_ms),
                judgments: Vec::new(),
            },
            canonical,
        });
    }
    out.sort_by(|a, b| {
        (a.ordinal, &a.canonical, a.created_ms, &a.line.event_id).cmp(&(b.ordinal, &b.canonical, b.created_ms, &b.line.event_id))
    });
    Ok(out)
}

pub(crate) fn export(tx: &Tx<'_>, job_id: &str, filter: ExportFilter) -> Result<String> {
    tx.job(job_id)?;
    let rows = event_rows(tx, job_id)?;
    let mut out = String::new();
    match filter {
        ExportFilter::All => {
            let mut trails: BTreeMap<String, Vec<ReviewJudgment>> = BTreeMap::new();
            for mut row in rows {
                if !trails.contains_key(&row.line.ideal_id) {
                    let trail = judgment_trail(tx, job_id, &row.line.ideal_id)?;
                    trails.insert(row.line.ideal_id.clone(), trail);
                }
                row.line.judgments = trails[&row.line.ideal_id].clone();
                out.push_str(&serde_json::to_string(&row.line)?);
                out.push('\n');
            }
        }
        ExportFilter::AcceptedOnly => {
            let mut lines: Vec<AcceptedLine> = Vec::new();
            let mut supporters: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for row in &rows {
                supporters.entry(row.line.ideal_id.clone()).or_default().insert(row.line.annotator_id.clone());
            }
            let mut done = HashSet::new();
            for row in rows {
                if !done.insert(row.line.ideal_id.clone()) {
                    continue;
                }
                let trail = judgment_trail(tx, job_id, &row.line.ideal_id)?;
                let accepted = trail.iter().any(|j| j.live && j.verdict == Verdict::Accepted);
                if !accepted {
                    continue;
                }
                lines.push(AcceptedLine {
                    format_version: FORMAT_VERSION,
                    job_id: job_id.to_string(),
                    example_id: row.line.example_id,
                    supporting_annotators: supporters[&row.line.ideal_id].iter().cloned().collect(),
                    ideal_id: row.line.ideal_id,
                    payload: row.line.payload,
                    judgments: trail,
                });
            }
            for line in lines {
                out.push_str(&serde_json::to_string(&line)?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Removes every event and judgment of the job. Tasks and ideals remain.
pub(crate) fn wipe(tx: &Tx<'_>, job_id: &str) -> Result<usize> {
    tx.job(job_id)?;
    let judgments = tx.conn.execute("DELETE FROM judgments WHERE job_id = ?1", [job_id])?;
    let events = tx.conn.execute(
        "DELETE FROM events WHERE task_id IN (SELECT id FROM tasks WHERE job_id = ?1)",
        [job_id],
    )?;
    Ok(judgments + events)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportCounts {
    pub lines: usize,
    pub events: usize,
    pub judgments: usize,
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::MalformedImport { line, message: message.into() }
}

/// Restores events and judgments from an `all` export into an existing job
/// whose tasks are present and submitted.
pub(crate) fn import(tx: &Tx<'_>, job_id: &str, text: &str) -> Result<ImportCounts> {
    let job = tx.job(job_id)?;
    let schema = tx.schema(&job.schema_id)?;
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: EventLine = serde_json::from_str(raw).map_err(|e| bad(i + 1, e.to_string()))?;
        if line.format_version != FORMAT_VERSION {
            return Err(bad(i + 1, format!("unsupported format_version {}", line.format_version)));
        }
        if line.job_id != job_id {
            return Err(bad(i + 1, format!("line belongs to job {}", line.job_id)));
        }
        lines.push((i + 1, line));
    }

    // Relations may point at span ideals, so those go in first.
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by_key(|&k| matches!(lines[k].1.payload, IdealPayload::Relation { .. }));
    for &k in &order {
        let (n, line) = &lines[k];
        let (example, _) = tx.example(&job.dataset_id, &line.example_id).map_err(|e| bad(*n, e.to_string()))?;
        let canonical = line.payload.canonicalize(&example.content).map_err(|e| bad(*n, e.to_string()))?;
        if canonical != line.payload {
            return Err(bad(*n, "payload is not in canonical form"));
        }
        line.payload.validate_against(&schema).map_err(|e| bad(*n, e.to_string()))?;
        let id = intern_canonical(tx, &job.dataset_id, &example.id, &line.payload, Some(&line.ideal_id))?;
        if id != line.ideal_id {
            return Err(bad(*n, format!("payload already stored as ideal {id}")));
        }
    }

    let mut counts = ImportCounts { lines: lines.len(), ..Default::default() };
    let mut judgments: Vec<(i64, usize, ReviewJudgment)> = Vec::new();
    let mut seen_judgments = HashSet::new();
    for (pos, (n, line)) in lines.iter().enumerate() {
        let task = tx.task(&line.task_id).map_err(|e| bad(*n, e.to_string()))?;
        if task.job_id != job_id || task.example_id != line.example_id || task.annotator_id != line.annotator_id {
            return Err(bad(*n, "task does not match the line's job, example or annotator"));
        }
        if task.state != TaskState::Submitted {
            return Err(bad(*n, "task is not submitted"));
        }
        let created = parse_timestamp(&line.created_at).ok_or_else(|| bad(*n, "bad created_at"))?;
        tx.conn.execute(
            "INSERT INTO events (id, ideal_id, task_id, source, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![line.event_id, line.ideal_id, line.task_id, line.source.as_str(), created],
        )?;
        counts.events += 1;
        for (k, j) in line.judgments.iter().enumerate() {
            if j.ideal_id != line.ideal_id || j.job_id != job_id {
                return Err(bad(*n, format!("judgment {} belongs elsewhere", j.id)));
            }
            if seen_judgments.insert(j.id.clone()) {
                let at = parse_timestamp(&j.created_at).ok_or_else(|| bad(*n, "bad judgment created_at"))?;
                judgments.push((at, pos * 1_000_000 + k, j.clone()));
            }
        }
        if pos == 0 {
            tx.checkpoint(FaultPoint::ImportMidway)?;
        }
    }
    // Judgment order decides which accepted ideal is "earliest", so keep it.
    judgments.sort_by_key(|(at, pos, _)| (*at, *pos));
    for (at, _, j) in judgments {
        tx.conn.execute(
            "INSERT INTO judgments (id, job_id, ideal_id, reviewer_id, verdict, cause, caused_by, created_at, live)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
            params![
                j.id,
                job_id,
                j.ideal_id,
                j.reviewer_id,
                j.verdict.as_str(),
                j.cause.as_str(),
                j.caused_by,
                at,
                j.live as i64
            ],
        )?;
        counts.judgments += 1;
    }
    Ok(counts)
}
