//! Ideal interning: an annotation's content is stored once per example, the
//! first time anyone asserts it.

use std::collections::BTreeSet;

use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{char_len, Example, IdealKind, IdealPayload, RelationEdge, RelationNode, Schema};
use crate::store::Tx;

/// A payload as submitted by a client. Relation nodes may name an existing
/// span ideal or describe a span inline; inline spans are interned first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PayloadInput {
    Span { start: usize, end: usize, tag: String },
    Class { class: String },
    Relation { edges: Vec<EdgeInput> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeInput {
    pub parent: NodeInput,
    pub child: NodeInput,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeInput {
    Ideal(String),
    Span { start: usize, end: usize, tag: String },
    Nonterminal { label: String, local_id: String },
}

impl From<IdealPayload> for PayloadInput {
    fn from(payload: IdealPayload) -> Self {
        match payload {
            IdealPayload::Span { start, end, tag } => PayloadInput::Span { start, end, tag },
            IdealPayload::Class { class } => PayloadInput::Class { class },
            IdealPayload::Relation { edges } => PayloadInput::Relation {
                edges: edges
                    .into_iter()
                    .map(|e| EdgeInput { parent: e.parent.into(), child: e.child.into(), label: e.label })
                    .collect(),
            },
        }
    }
}

impl From<RelationNode> for NodeInput {
    fn from(node: RelationNode) -> Self {
        match node {
            RelationNode::Ideal(id) => NodeInput::Ideal(id),
            RelationNode::Nonterminal { label, local_id } => NodeInput::Nonterminal { label, local_id },
        }
    }
}

/// Interns `input` for the example and returns the ideal id. Idempotent.
pub(crate) fn intern(
    tx: &Tx<'_>,
    dataset_id: &str,
    example: &Example,
    schema: &Schema,
    input: &PayloadInput,
) -> Result<String> {
    let payload = resolve(tx, dataset_id, example, schema, input)?;
    let payload = payload.canonicalize(&example.content).map_err(|e| Error::InvalidPayload(e.to_string()))?;
    payload.validate_against(schema)?;
    intern_canonical(tx, dataset_id, &example.id, &payload, None)
}

/// Stores an already canonical payload, optionally under a caller-chosen id.
/// Returns the id of the stored row, which differs from `id` only if an
/// identical payload was interned earlier under another id.
pub(crate) fn intern_canonical(
    tx: &Tx<'_>,
    dataset_id: &str,
    example_id: &str,
    payload: &IdealPayload,
    id: Option<&str>,
) -> Result<String> {
    let canonical = payload.canonical_key();
    let (start, end, label, node_key) = match payload {
        IdealPayload::Span { start, end, tag } => {
            (Some(*start as i64), Some(*end as i64), Some(tag.clone()), None)
        }
        IdealPayload::Class { class } => (None, None, Some(class.clone()), None),
        IdealPayload::Relation { .. } => {
            let nodes = payload.relation_nodes().unwrap_or_default();
            (None, None, None, Some(serde_json::to_string(&nodes)?))
        }
    };
    let fresh = match id {
        Some(id) => id.to_string(),
        None => tx.new_id(),
    };
    let mut insert = tx.conn.prepare_cached(
        "INSERT INTO ideals (id, dataset_id, example_id, kind, span_start, span_end, label, node_key, canonical)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)
         ON CONFLICT (dataset_id, example_id, canonical) DO NOTHING",
    )?;
    insert.execute(params![
        fresh,
        dataset_id,
        example_id,
        payload.kind().as_str(),
        start,
        end,
        label,
        node_key,
        canonical
    ])?;
    let mut select = tx.conn.prepare_cached(
        "SELECT id FROM ideals WHERE dataset_id = ?1 AND example_id = ?2 AND canonical = ?3",
    )?;
    Ok(select.query_row(params![dataset_id, example_id, canonical], |row| row.get(0))?)
}

fn resolve(
    tx: &Tx<'_>,
    dataset_id: &str,
    example: &Example,
    schema: &Schema,
    input: &PayloadInput,
) -> Result<IdealPayload> {
    Ok(match input {
        PayloadInput::Span { start, end, tag } => {
            let len = char_len(&example.content);
            if *start >= *end || *end > len {
                return Err(Error::InvalidPayload(format!(
                    "span {start}..{end} out of bounds for content of {len} code points"
                )));
            }
            IdealPayload::Span { start: *start, end: *end, tag: tag.clone() }
        }
        PayloadInput::Class { class } => IdealPayload::Class { class: class.clone() },
        PayloadInput::Relation { edges } => {
            let mut resolved = Vec::with_capacity(edges.len());
            for edge in edges {
                resolved.push(RelationEdge {
                    parent: resolve_node(tx, dataset_id, example, schema, &edge.parent)?,
                    child: resolve_node(tx, dataset_id, example, schema, &edge.child)?,
                    label: edge.label.clone(),
                });
            }
            IdealPayload::Relation { edges: resolved }
        }
    })
}

fn resolve_node(
    tx: &Tx<'_>,
    dataset_id: &str,
    example: &Example,
    schema: &Schema,
    node: &NodeInput,
) -> Result<RelationNode> {
    Ok(match node {
        NodeInput::Ideal(id) => {
            let ideal = tx.ideal(id).map_err(|_| Error::InvalidPayload(format!("unknown node ideal {id}")))?;
            if ideal.dataset_id != dataset_id || ideal.example_id != example.id {
                return Err(Error::InvalidPayload(format!("node ideal {id} is on another example")));
            }
            if ideal.payload.kind() != IdealKind::Span {
                return Err(Error::InvalidPayload(format!("node ideal {id} is not a span")));
            }
            RelationNode::Ideal(id.clone())
        }
        NodeInput::Span { start, end, tag } => {
            let span = PayloadInput::Span { start: *start, end: *end, tag: tag.clone() };
            RelationNode::Ideal(intern(tx, dataset_id, example, schema, &span)?)
        }
        NodeInput::Nonterminal { label, local_id } => {
            RelationNode::Nonterminal { label: label.clone(), local_id: local_id.clone() }
        }
    })
}

/// Ideal ids on the example that conflict with `payload`, found through the
/// per-example position index rather than a table scan. Restricted to ideals
/// with at least one event in `job_id`.
pub(crate) fn conflicting_in_job(
    tx: &Tx<'_>,
    job_id: &str,
    dataset_id: &str,
    ideal_id: &str,
    example_id: &str,
    payload: &IdealPayload,
    schema: &Schema,
) -> Result<Vec<String>> {
    let in_job = "EXISTS (SELECT 1 FROM events e JOIN tasks t ON t.id = e.task_id
                          WHERE e.ideal_id = i.id AND t.job_id = ?1)";
    let ids: Vec<String> = match payload {
        IdealPayload::Span { start, end, .. } => {
            let mut stmt = tx.conn.prepare_cached(&format!(
                "SELECT i.id FROM ideals i
                 WHERE i.dataset_id = ?2 AND i.example_id = ?3 AND i.kind = 'span'
                   AND i.span_start < ?5 AND i.span_end > ?4 AND i.id != ?6 AND {in_job}
                 ORDER BY i.id"
            ))?;
            let rows = stmt.query_map(
                params![job_id, dataset_id, example_id, *start as i64, *end as i64, ideal_id],
                |r| r.get(0),
            )?;
            rows.collect::<rusqlite::Result<_>>()?
        }
        IdealPayload::Class { class } => {
            if schema.classification_mode == crate::model::ClassificationMode::MultiLabel {
                return Ok(Vec::new());
            }
            let mut stmt = tx.conn.prepare_cached(&format!(
                "SELECT i.id FROM ideals i
                 WHERE i.dataset_id = ?2 AND i.example_id = ?3 AND i.kind = 'class'
                   AND i.label != ?4 AND i.id != ?5 AND {in_job}
                 ORDER BY i.id"
            ))?;
            let rows = stmt.query_map(params![job_id, dataset_id, example_id, class, ideal_id], |r| r.get(0))?;
            rows.collect::<rusqlite::Result<_>>()?
        }
        IdealPayload::Relation { .. } => {
            let nodes: BTreeSet<_> = payload.relation_nodes().unwrap_or_default();
            let node_key = serde_json::to_string(&nodes)?;
            let mut stmt = tx.conn.prepare_cached(&format!(
                "SELECT i.id FROM ideals i
                 WHERE i.dataset_id = ?2 AND i.example_id = ?3 AND i.kind = 'relation'
                   AND i.node_key = ?4 AND i.id != ?5 AND {in_job}
                 ORDER BY i.id"
            ))?;
            let rows = stmt.query_map(params![job_id, dataset_id, example_id, node_key, ideal_id], |r| r.get(0))?;
            rows.collect::<rusqlite::Result<_>>()?
        }
    };
    Ok(ids)
}
