//! Datasets, schemas, annotators and teams: the reference data jobs are built from.

use std::collections::HashSet;

use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Diagnostic, Error, Result};
use crate::model::{char_len, Annotator, ContextConfig, Dataset, Example, Metadata, Scalar, Schema, Team};
use crate::store::Tx;

/// One example as uploaded; `id` is generated when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub content: String,
    #[serde(default)]
    pub metadata: Metadata,
}

/// A parsed dataset document: either a bare JSON array of examples or an
/// object `{"format_version": 1, "name", "examples", "context_config"}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDocument {
    pub name: Option<String>,
    pub examples: Vec<ExampleInput>,
    pub context_config: Option<ContextConfig>,
}

/// Parses and validates an uploaded dataset, reporting every problem found.
pub fn parse_dataset_document(text: &str) -> Result<DatasetDocument> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Error::MalformedDataset(vec![Diagnostic {
            field: String::new(),
            line: Some(e.line()),
            message: e.to_string(),
        }])
    })?;
    let mut diags = Vec::new();
    let (name, items, context_config, prefix) = match value {
        Value::Array(items) => (None, items, None, ""),
        Value::Object(mut obj) => {
            match obj.get("format_version") {
                None | Some(Value::Null) => {}
                Some(v) if v.as_u64() == Some(1) => {}
                Some(v) => diags.push(Diagnostic::new("format_version", format!("unsupported version {v}"))),
            }
            let name = match obj.remove("name") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s),
                Some(_) => {
                    diags.push(Diagnostic::new("name", "must be a string"));
                    None
                }
            };
            let context_config = match obj.remove("context_config") {
                None | Some(Value::Null) => None,
                Some(v) => match serde_json::from_value::<ContextConfig>(v) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        diags.push(Diagnostic::new("context_config", e.to_string()));
                        None
                    }
                },
            };
            let items = match obj.remove("examples") {
                Some(Value::Array(items)) => items,
                _ => {
                    diags.push(Diagnostic::new("examples", "must be an array of examples"));
                    Vec::new()
                }
            };
            (name, items, context_config, "examples")
        }
        _ => {
            return Err(Error::MalformedDataset(vec![Diagnostic::new(
                "",
                "expected a JSON array of examples or a dataset object",
            )]))
        }
    };

    let mut examples = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let at = |field: &str| format!("{prefix}[{i}]{field}");
        let Value::Object(mut obj) = item else {
            diags.push(Diagnostic::new(at(""), "must be an object"));
            continue;
        };
        let id = match obj.remove("id") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(Value::Number(n)) => Some(n.to_string()),
            Some(_) => {
                diags.push(Diagnostic::new(at(".id"), "must be a string"));
                None
            }
        };
        let content = match obj.remove("content") {
            Some(Value::String(s)) => s,
            _ => {
                diags.push(Diagnostic::new(at(".content"), "must be a string"));
                String::new()
            }
        };
        let mut metadata = Metadata::new();
        match obj.remove("metadata") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                for (key, value) in map {
                    let scalar = match value {
                        Value::Bool(b) => Scalar::Bool(b),
                        Value::Number(n) => Scalar::Number(n),
                        Value::String(s) => Scalar::Text(s),
                        _ => {
                            diags.push(Diagnostic::new(
                                at(&format!(".metadata.{key}")),
                                "must be a string, number or boolean",
                            ));
                            continue;
                        }
                    };
                    metadata.insert(key, scalar);
                }
            }
            Some(_) => diags.push(Diagnostic::new(at(".metadata"), "must be a flat object")),
        }
        examples.push(ExampleInput { id, content, metadata });
    }
    diags.extend(validate_examples(&examples, context_config.as_ref(), prefix));
    if !diags.is_empty() {
        return Err(Error::MalformedDataset(diags));
    }
    Ok(DatasetDocument { name, examples, context_config })
}

/// Content non-empty, ids unique, context keys present somewhere.
pub fn validate_examples(
    examples: &[ExampleInput],
    context_config: Option<&ContextConfig>,
    prefix: &str,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut ids = HashSet::new();
    for (i, example) in examples.iter().enumerate() {
        if example.content.is_empty() {
            diags.push(Diagnostic::new(format!("{prefix}[{i}].content"), "must be non-empty"));
        }
        if let Some(id) = &example.id {
            if id.is_empty() {
                diags.push(Diagnostic::new(format!("{prefix}[{i}].id"), "must be non-empty"));
            } else if !ids.insert(id.as_str()) {
                diags.push(Diagnostic::new(format!("{prefix}[{i}].id"), format!("duplicate id {id:?}")));
            }
        }
    }
    if let Some(config) = context_config {
        let keys = std::iter::once(("group_by", &config.group_by)).chain(config.sort_by.iter().map(|k| ("sort_by", k)));
        for (field, key) in keys {
            if !examples.iter().any(|e| e.metadata.contains_key(key)) {
                diags.push(Diagnostic::new(
                    format!("context_config.{field}"),
                    format!("metadata key {key:?} is absent from every example"),
                ));
            }
        }
    }
    diags
}

pub(crate) fn insert_dataset(
    tx: &Tx<'_>,
    name: &str,
    examples: &[ExampleInput],
    context_config: Option<&ContextConfig>,
) -> Result<(Dataset, Vec<Example>)> {
    if examples.is_empty() {
        return Err(Error::MalformedDataset(vec![Diagnostic::new("examples", "dataset is empty")]));
    }
    let diags = validate_examples(examples, context_config, "examples");
    if !diags.is_empty() {
        return Err(Error::MalformedDataset(diags));
    }
    let id = tx.new_id();
    tx.conn.execute(
        "INSERT INTO datasets (id, name, group_by, sort_by, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
        params![
            id,
            name,
            context_config.map(|c| &c.group_by),
            context_config.and_then(|c| c.sort_by.as_ref()),
            tx.now_ms()
        ],
    )?;
    let stored = append_examples(tx, &id, examples)?;
    Ok((tx.dataset(&id)?, stored))
}

pub(crate) fn append_examples(tx: &Tx<'_>, dataset_id: &str, examples: &[ExampleInput]) -> Result<Vec<Example>> {
    let diags = validate_examples(examples, None, "examples");
    if !diags.is_empty() {
        return Err(Error::MalformedDataset(diags));
    }
    let next: i64 = tx.conn.query_row(
        "SELECT coalesce(max(ordinal) + 1, 0) FROM examples WHERE dataset_id = ?1",
        [dataset_id],
        |row| row.get(0),
    )?;
    let mut stmt = tx.conn.prepare_cached(
        "INSERT INTO examples (dataset_id, id, ordinal, content, content_len, metadata)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
    )?;
    let mut stored = Vec::with_capacity(examples.len());
    for (i, input) in examples.iter().enumerate() {
        let id = input.id.clone().unwrap_or_else(|| tx.new_id());
        let inserted = stmt.execute(params![
            dataset_id,
            id,
            next + i as i64,
            input.content,
            char_len(&input.content) as i64,
            serde_json::to_string(&input.metadata)?,
        ]);
        match inserted {
            Err(rusqlite::Error::SqliteFailure(e, _))
                if e.code == rusqlite::ErrorCode::ConstraintViolation =>
            {
                return Err(Error::DuplicateExample(id));
            }
            other => other?,
        };
        stored.push(Example { id, content: input.content.clone(), metadata: input.metadata.clone() });
    }
    Ok(stored)
}

/// The examples displayed together with `example_id`: every example sharing
/// its `group_by` value, ordered by `sort_by` then upload order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextGroup {
    pub target_id: String,
    pub examples: Vec<Example>,
}

pub(crate) fn context_group(tx: &Tx<'_>, dataset_id: &str, example_id: &str) -> Result<ContextGroup> {
    let dataset = tx.dataset(dataset_id)?;
    let (target, _) = tx.example(dataset_id, example_id)?;
    let single = || ContextGroup { target_id: target.id.clone(), examples: vec![target.clone()] };
    let Some(config) = dataset.context_config else {
        return Ok(single());
    };
    let Some(value) = target.metadata.get(&config.group_by) else {
        return Ok(single());
    };
    let mut members: Vec<(usize, Example)> = tx
        .examples(dataset_id, usize::MAX, 0)?
        .into_iter()
        .enumerate()
        .filter(|(_, e)| e.metadata.get(&config.group_by) == Some(value))
        .collect();
    if let Some(sort_by) = &config.sort_by {
        members.sort_by(|(ia, a), (ib, b)| {
            match (a.metadata.get(sort_by), b.metadata.get(sort_by)) {
                (Some(x), Some(y)) => x.sort_cmp(y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            }
            .then(ia.cmp(ib))
        });
    }
    Ok(ContextGroup { target_id: target.id, examples: members.into_iter().map(|(_, e)| e).collect() })
}

pub(crate) fn insert_schema(tx: &Tx<'_>, mut schema: Schema) -> Result<Schema> {
    schema.validate()?;
    if schema.id.is_empty() {
        schema.id = tx.new_id();
    }
    let exists = tx
        .conn
        .query_row("SELECT 1 FROM schemas WHERE id = ?1", [&schema.id], |_| Ok(()))
        .optional()?;
    if exists.is_some() {
        return Err(Error::AlreadyExists(format!("schema {}", schema.id)));
    }
    tx.conn.execute(
        "INSERT INTO schemas (id, name, body) VALUES (?1, ?2, ?3)",
        params![schema.id, schema.name, serde_json::to_string(&schema)?],
    )?;
    Ok(schema)
}

/// Inserts the annotator, or updates its name and kind when the id exists.
pub(crate) fn upsert_annotator(tx: &Tx<'_>, mut annotator: Annotator) -> Result<Annotator> {
    if annotator.id.is_empty() {
        annotator.id = tx.new_id();
    }
    tx.conn.execute(
        "INSERT INTO annotators (id, display_name, kind) VALUES (?1, ?2, ?3)
         ON CONFLICT (id) DO UPDATE SET display_name = excluded.display_name, kind = excluded.kind",
        params![annotator.id, annotator.display_name, annotator.kind.as_str()],
    )?;
    Ok(annotator)
}

pub(crate) fn insert_team(tx: &Tx<'_>, name: &str, members: &[String]) -> Result<Team> {
    let id = tx.new_id();
    tx.conn.execute("INSERT INTO teams (id, name) VALUES (?1, ?2)", params![id, name])?;
    for member in members {
        add_member(tx, &id, member)?;
    }
    tx.team(&id)
}

pub(crate) fn add_member(tx: &Tx<'_>, team_id: &str, annotator_id: &str) -> Result<Team> {
    tx.team(team_id)?;
    tx.annotator(annotator_id)?;
    let position: i64 = tx.conn.query_row(
        "SELECT coalesce(max(position) + 1, 0) FROM team_members WHERE team_id = ?1",
        [team_id],
        |row| row.get(0),
    )?;
    let inserted = tx.conn.execute(
        "INSERT OR IGNORE INTO team_members (team_id, annotator_id, position) VALUES (?1, ?2, ?3)",
        params![team_id, annotator_id, position],
    )?;
    if inserted == 0 {
        return Err(Error::AlreadyExists(format!("member {annotator_id} of team {team_id}")));
    }
    tx.team(team_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bare_array() {
        let doc = parse_dataset_document(
            r#"[{"content": "hello", "metadata": {"conv": "c1", "ts": 3, "ok": true}},
                {"id": "x", "content": "world"}]"#,
        )
        .unwrap();
        assert_eq!(doc.examples.len(), 2);
        assert_eq!(doc.examples[1].id.as_deref(), Some("x"));
        assert_eq!(doc.examples[0].metadata.len(), 3);
    }

    #[test]
    fn reports_offending_index() {
        let err = parse_dataset_document(
            r#"{"format_version": 1, "examples": [{"content": "a"}, {"content": ""}, {"content": "c", "metadata": {"n": {"x": 1}}}]}"#,
        )
        .unwrap_err();
        let Error::MalformedDataset(diags) = err else { panic!() };
        let fields: Vec<_> = diags.iter().map(|d| d.field.as_str()).collect();
        assert_eq!(fields, ["examples[2].metadata.n", "examples[1].content"]);
    }

    #[test]
    fn reports_parse_line() {
        let err = parse_dataset_document("[\n{\"content\": \"a\"},\n{oops}\n]").unwrap_err();
        let Error::MalformedDataset(diags) = err else { panic!() };
        assert_eq!(diags[0].line, Some(3));
    }

    #[test]
    fn context_keys_must_exist() {
        let examples = vec![ExampleInput { id: None, content: "a".into(), metadata: Metadata::new() }];
        let config = ContextConfig { group_by: "conversation_id".into(), sort_by: None };
        let diags = validate_examples(&examples, Some(&config), "examples");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "context_config.group_by");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let example = |id: &str| ExampleInput { id: Some(id.into()), content: "a".into(), metadata: Metadata::new() };
        let diags = validate_examples(&[example("a"), example("b"), example("a")], None, "examples");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "examples[2].id");
    }
}
