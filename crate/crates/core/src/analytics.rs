//! Seen-aware agreement, precision/recall against reviewed gold, progress.
//!
//! "Seen" comes from submitted tasks only. An empty submission still counts
//! as having seen the example.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassificationMode, IdealPayload, Job, Verdict};
use crate::review::live_judgments;
use crate::store::{StoredIdeal, Tx};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenMatrix {
    pub job_id: String,
    pub rows: BTreeMap<String, BTreeSet<String>>,
}

impl SeenMatrix {
    pub fn saw(&self, annotator: &str, example: &str) -> bool {
        self.rows.get(annotator).is_some_and(|s| s.contains(example))
    }

    pub fn co_seen(&self, a: &str, b: &str) -> BTreeSet<String> {
        match (self.rows.get(a), self.rows.get(b)) {
            (Some(x), Some(y)) => x.intersection(y).cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn annotators(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }
}

pub(crate) fn seen_matrix(tx: &Tx<'_>, job_id: &str) -> Result<SeenMatrix> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT annotator_id, example_id FROM tasks WHERE job_id = ?1 AND state = 'submitted'",
    )?;
    let mut rows: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in stmt.query_map([job_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))? {
        let (annotator, example) = row?;
        rows.entry(annotator).or_default().insert(example);
    }
    Ok(SeenMatrix { job_id: job_id.to_string(), rows })
}

/// (annotator, ideal) pairs asserted in the job.
fn assertions(tx: &Tx<'_>, job_id: &str) -> Result<Vec<(String, StoredIdeal)>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT DISTINCT t.annotator_id, i.id, i.dataset_id, i.example_id, i.canonical
         FROM events e JOIN tasks t ON t.id = e.task_id JOIN ideals i ON i.id = e.ideal_id
         WHERE t.job_id = ?1 ORDER BY t.annotator_id, i.id",
    )?;
    let mut rows = stmt.query([job_id])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let annotator: String = row.get(0)?;
        let ideal = StoredIdeal::from_row_at(row, 1)?;
        out.push((annotator, ideal));
    }
    Ok(out)
}

/// Span ideals asserted by `annotator`, restricted to `examples`.
fn span_set<'a>(
    asserted: &'a [(String, StoredIdeal)],
    annotator: &str,
    examples: &BTreeSet<String>,
) -> BTreeSet<&'a str> {
    asserted
        .iter()
        .filter(|(who, ideal)| {
            who == annotator
                && matches!(ideal.payload, IdealPayload::Span { .. })
                && examples.contains(&ideal.example_id)
        })
        .map(|(_, ideal)| ideal.id.as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub co_seen: usize,
    pub matches: usize,
    pub a_count: usize,
    pub b_count: usize,
    /// Undefined when the pair shares no example.
    pub f1: Option<f64>,
}

fn pair_agreement(seen: &SeenMatrix, asserted: &[(String, StoredIdeal)], a: &str, b: &str) -> PairAgreement {
    let shared = seen.co_seen(a, b);
    let sa = span_set(asserted, a, &shared);
    let sb = span_set(asserted, b, &shared);
    let matches = sa.intersection(&sb).count();
    let f1 = match (shared.is_empty(), sa.len() + sb.len()) {
        (true, _) => None,
        // Both saw the same examples and marked nothing: full agreement.
        (false, 0) => Some(1.0),
        (false, total) => Some(2.0 * matches as f64 / total as f64),
    };
    PairAgreement {
        a: a.to_string(),
        b: b.to_string(),
        co_seen: shared.len(),
        matches,
        a_count: sa.len(),
        b_count: sb.len(),
        f1,
    }
}

pub(crate) fn pairwise_span_agreement(tx: &Tx<'_>, job_id: &str, a: &str, b: &str) -> Result<PairAgreement> {
    tx.job(job_id)?;
    let seen = seen_matrix(tx, job_id)?;
    let asserted = assertions(tx, job_id)?;
    Ok(pair_agreement(&seen, &asserted, a, b))
}

/// Every unordered pair of annotators who submitted at least one task.
pub(crate) fn all_pairs(tx: &Tx<'_>, job_id: &str) -> Result<Vec<PairAgreement>> {
    let seen = seen_matrix(tx, job_id)?;
    let asserted = assertions(tx, job_id)?;
    let names: Vec<&String> = seen.annotators().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            out.push(pair_agreement(&seen, &asserted, a, b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleissStratum {
    pub raters: usize,
    pub items: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAgreement {
    /// Examples with at least two raters.
    pub items: usize,
    pub percent_agreement: Option<f64>,
    /// The single stratum's kappa, or the item-weighted mean across strata.
    pub kappa: Option<f64>,
    pub strata: Vec<FleissStratum>,
}

/// Fleiss' kappa for items that all have the same number of raters.
/// Each row holds per-category counts.
pub fn fleiss_kappa(rows: &[Vec<usize>]) -> Option<f64> {
    let first = rows.first()?;
    let n: usize = first.iter().sum();
    if n < 2 || rows.iter().any(|r| r.iter().sum::<usize>() != n) {
        return None;
    }
    let items = rows.len() as f64;
    let nf = n as f64;
    let categories = rows.iter().map(Vec::len).max().unwrap_or(0);
    let p_bar = rows.iter().map(|r| item_agreement(r)).sum::<f64>() / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let p = rows.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum::<usize>() as f64 / (items * nf);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Some(1.0);
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

/// Fraction of rater pairs on one item that chose the same category.
fn item_agreement(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let agreeing: usize = counts.iter().map(|&c| c * c.saturating_sub(1)).sum();
    agreeing as f64 / (n * (n - 1)) as f64
}

pub(crate) fn classification_agreement(tx: &Tx<'_>, job: &Job) -> Result<ClassAgreement> {
    let schema = tx.schema(&job.schema_id)?;
    if schema.classes.is_empty() || schema.classification_mode != ClassificationMode::SingleLabel {
        return Err(Error::WrongJobKind(job.id.clone()));
    }
    let class_index: HashMap<&str, usize> =
        schema.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let seen = seen_matrix(tx, &job.id)?;
    // example -> annotator -> class
    let mut labels: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (annotator, ideal) in assertions(tx, &job.id)? {
        if let IdealPayload::Class { class } = &ideal.payload {
            if seen.saw(&annotator, &ideal.example_id) {
                if let Some(&j) = class_index.get(class.as_str()) {
                    labels.entry(ideal.example_id.clone()).or_default().insert(annotator, j);
                }
            }
        }
    }
    let mut by_raters: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for raters in labels.values() {
        if raters.len() < 2 {
            continue;
        }
        let mut counts = vec![0; schema.classes.len()];
        for &j in raters.values() {
            counts[j] += 1;
        }
        by_raters.entry(raters.len()).or_default().push(counts);
    }
    let all: Vec<&Vec<usize>> = by_raters.values().flatten().collect();
    let items = all.len();
    let percent_agreement =
        (items > 0).then(|| all.iter().map(|r| item_agreement(r)).sum::<f64>() / items as f64);
    let strata: Vec<FleissStratum> = by_raters
        .iter()
        .filter_map(|(&raters, rows)| {
            fleiss_kappa(rows).map(|kappa| FleissStratum { raters, items: rows.len(), kappa })
        })
        .collect();
    let kappa = match strata.as_slice() {
        [] => None,
        [one] => Some(one.kappa),
        many => {
            let total: usize = many.iter().map(|s| s.items).sum();
            Some(many.iter().map(|s| s.kappa * s.items as f64).sum::<f64>() / total as f64)
        }
    };
    Ok(ClassAgreement { items, percent_agreement, kappa, strata })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub source: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub(crate) fn precision_recall(tx: &Tx<'_>, job_id: &str, source: &str) -> Result<PrecisionRecall> {
    tx.job(job_id)?;
    let judgments = live_judgments(tx, job_id)?;
    if !judgments.values().any(|j| j.verdict == Verdict::Accepted) {
        return Err(Error::NoGold(job_id.to_string()));
    }
    let seen = seen_matrix(tx, job_id)?;
    let asserted = assertions(tx, job_id)?;
    let mine: BTreeSet<&str> = asserted
        .iter()
        .filter(|(who, ideal)| who == source && seen.saw(source, &ideal.example_id))
        .map(|(_, ideal)| ideal.id.as_str())
        .collect();
    let (mut tp, mut fp) = (0, 0);
    for id in &mine {
        match judgments.get(*id).map(|j| j.verdict) {
            Some(Verdict::Accepted) => tp += 1,
            Some(Verdict::Rejected) => fp += 1,
            None => {}
        }
    }
    let gold_on_seen: BTreeSet<&str> = asserted
        .iter()
        .filter(|(_, ideal)| seen.saw(source, &ideal.example_id))
        .filter(|(_, ideal)| judgments.get(&ideal.id).is_some_and(|j| j.verdict == Verdict::Accepted))
        .map(|(_, ideal)| ideal.id.as_str())
        .collect();
    let fn_ = gold_on_seen.difference(&mine).count();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(PrecisionRecall {
        source: source.to_string(),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub job_id: String,
    pub total_tasks: usize,
    pub submitted_tasks: usize,
    pub per_annotator: BTreeMap<String, usize>,
    pub window_minutes: u64,
    pub events_in_window: usize,
    pub events_per_hour: f64,
}

pub const DEFAULT_WINDOW_MINUTES: u64 = 60;

pub(crate) fn progress(tx: &Tx<'_>, job_id: &str, now_ms: i64, window_minutes: u64) -> Result<ProgressReport> {
    tx.job(job_id)?;
    let mut stmt = tx.conn.prepare_cached(
        "SELECT annotator_id, count(*), sum(state = 'submitted') FROM tasks WHERE job_id = ?1 GROUP BY annotator_id",
    )?;
    let mut per_annotator = BTreeMap::new();
    let (mut total, mut submitted) = (0, 0);
    for row in stmt.query_map([job_id], |r| {
        Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)? as usize, r.get::<_, i64>(2)? as usize))
    })? {
        let (annotator, count, done) = row?;
        total += count;
        submitted += done;
        per_annotator.insert(annotator, done);
    }
    let window_ms = window_minutes.max(1) as i64 * 60_000;
    let events_in_window: i64 = tx.conn.query_row(
        "SELECT count(*) FROM events e JOIN tasks t ON t.id = e.task_id
         WHERE t.job_id = ?1 AND e.created_at > ?2 AND e.created_at <= ?3",
        rusqlite::params![job_id, now_ms - window_ms, now_ms],
        |r| r.get(0),
    )?;
    Ok(ProgressReport {
        job_id: job_id.to_string(),
        total_tasks: total,
        submitted_tasks: submitted,
        per_annotator,
        window_minutes: window_minutes.max(1),
        events_in_window: events_in_window as usize,
        events_per_hour: events_in_window as f64 * 60.0 / window_minutes.max(1) as f64,
    })
}
