use rusqlite::{params, OptionalExtension, Row};

use super::Tx;
use crate::error::{Error, Result};
use crate::model::{
    Annotator, AnnotatorKind, ContextConfig, Dataset, Example, IdealPayload, Job, JobState, Schema,
    Task, TaskState, Team,
};

/// An ideal row together with the dataset it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct StoredIdeal {
    pub id: String,
    pub dataset_id: String,
    pub example_id: String,
    pub payload: IdealPayload,
}

impl StoredIdeal {
    pub(crate) const COLUMNS: &'static str = "id, dataset_id, example_id, canonical";

    pub(crate) fn from_row(row: &Row<'_>) -> rusqlite::Result<Self> {
        Self::from_row_at(row, 0)
    }

    /// Reads the four ideal columns starting at column `at`.
    pub(crate) fn from_row_at(row: &Row<'_>, at: usize) -> rusqlite::Result<Self> {
        let canonical: String = row.get(at + 3)?;
        let payload = serde_json::from_str(&canonical).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(at + 3, rusqlite::types::Type::Text, Box::new(e))
        })?;
        Ok(Self { id: row.get(at)?, dataset_id: row.get(at + 1)?, example_id: row.get(at + 2)?, payload })
    }

    pub(crate) fn to_ideal(&self) -> crate::model::AnnotationIdeal {
        crate::model::AnnotationIdeal {
            id: self.id.clone(),
            example_id: self.example_id.clone(),
            payload: self.payload.clone(),
        }
    }
}

fn json_column<T: serde::de::DeserializeOwned>(row: &Row<'_>, idx: usize) -> rusqlite::Result<T> {
    let text: String = row.get(idx)?;
    serde_json::from_str(&text).map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

fn parse_column<T>(row: &Row<'_>, idx: usize, parse: fn(&str) -> Option<T>) -> rusqlite::Result<T> {
    let text: String = row.get(idx)?;
    parse(&text).ok_or_else(|| {
        rusqlite::Error::FromSqlConversionFailure(
            idx,
            rusqlite::types::Type::Text,
            format!("unexpected value {text:?}").into(),
        )
    })
}

impl Tx<'_> {
    pub(crate) fn dataset(&self, id: &str) -> Result<Dataset> {
        self.conn
            .query_row(
                "SELECT d.id, d.name, d.group_by, d.sort_by,
                        (SELECT count(*) FROM examples x WHERE x.dataset_id = d.id)
                 FROM datasets d WHERE d.id = ?1",
                [id],
                |row| {
                    let group_by: Option<String> = row.get(2)?;
                    let sort_by: Option<String> = row.get(3)?;
                    Ok(Dataset {
                        id: row.get(0)?,
                        name: row.get(1)?,
                        example_count: row.get::<_, i64>(4)? as usize,
                        context_config: group_by.map(|group_by| ContextConfig { group_by, sort_by }),
                    })
                },
            )
            .optional()?
            .ok_or_else(|| Error::UnknownDataset(id.to_string()))
    }

    /// The example and its upload position within the dataset.
    pub(crate) fn example(&self, dataset_id: &str, example_id: &str) -> Result<(Example, i64)> {
        self.conn
            .query_row(
                "SELECT id, content, metadata, ordinal FROM examples WHERE dataset_id = ?1 AND id = ?2",
                [dataset_id, example_id],
                |row| {
                    Ok((
                        Example { id: row.get(0)?, content: row.get(1)?, metadata: json_column(row, 2)? },
                        row.get(3)?,
                    ))
                },
            )
            .optional()?
            .ok_or_else(|| Error::UnknownExample(example_id.to_string()))
    }

    /// Examples in upload order.
    pub(crate) fn examples(&self, dataset_id: &str, limit: usize, offset: usize) -> Result<Vec<Example>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT id, content, metadata FROM examples WHERE dataset_id = ?1
             ORDER BY ordinal LIMIT ?2 OFFSET ?3",
        )?;
        let rows = stmt.query_map(
            params![dataset_id, limit.min(i64::MAX as usize) as i64, offset as i64],
            |row| Ok(Example { id: row.get(0)?, content: row.get(1)?, metadata: json_column(row, 2)? }),
        )?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub(crate) fn example_ordinals(&self, dataset_id: &str) -> Result<Vec<String>> {
        let mut stmt = self
            .conn
            .prepare_cached("SELECT id FROM examples WHERE dataset_id = ?1 ORDER BY ordinal")?;
        let rows = stmt.query_map([dataset_id], |row| row.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub(crate) fn schema(&self, id: &str) -> Result<Schema> {
        self.conn
            .query_row("SELECT body FROM schemas WHERE id = ?1", [id], |row| json_column(row, 0))
            .optional()?
            .ok_or_else(|| Error::UnknownSchema(id.to_string()))
    }

    pub(crate) fn annotator(&self, id: &str) -> Result<Annotator> {
        self.conn
            .query_row(
                "SELECT id, display_name, kind FROM annotators WHERE id = ?1",
                [id],
                |row| {
                    Ok(Annotator {
                        id: row.get(0)?,
                        display_name: row.get(1)?,
                        kind: parse_column(row, 2, AnnotatorKind::parse)?,
                    })
                },
            )
            .optional()?
            .ok_or_else(|| Error::UnknownAnnotator(id.to_string()))
    }

    pub(crate) fn team(&self, id: &str) -> Result<Team> {
        let name: String = self
            .conn
            .query_row("SELECT name FROM teams WHERE id = ?1", [id], |row| row.get(0))
            .optional()?
            .ok_or_else(|| Error::UnknownTeam(id.to_string()))?;
        let mut stmt = self.conn.prepare_cached(
            "SELECT annotator_id FROM team_members WHERE team_id = ?1 ORDER BY position",
        )?;
        let members = stmt.query_map([id], |row| row.get(0))?.collect::<rusqlite::Result<_>>()?;
        Ok(Team { id: id.to_string(), name, members })
    }

    pub(crate) fn job(&self, id: &str) -> Result<Job> {
        self.conn
            .query_row(
                "SELECT id, dataset_id, schema_id, team_id, redundancy, state, seed FROM jobs WHERE id = ?1",
                [id],
                |row| {
                    Ok(Job {
                        id: row.get(0)?,
                        dataset_id: row.get(1)?,
                        schema_id: row.get(2)?,
                        team_id: row.get(3)?,
                        redundancy: row.get::<_, i64>(4)? as usize,
                        state: parse_column(row, 5, JobState::parse)?,
                        seed: row.get::<_, i64>(6)? as u64,
                    })
                },
            )
            .optional()?
            .ok_or_else(|| Error::UnknownJob(id.to_string()))
    }

    pub(crate) fn task(&self, id: &str) -> Result<Task> {
        self.conn
            .query_row(
                "SELECT id, job_id, annotator_id, example_id, state FROM tasks WHERE id = ?1",
                [id],
                task_from_row,
            )
            .optional()?
            .ok_or_else(|| Error::UnknownTask(id.to_string()))
    }

    pub(crate) fn ideal(&self, id: &str) -> Result<StoredIdeal> {
        self.conn
            .query_row(
                &format!("SELECT {} FROM ideals WHERE id = ?1", StoredIdeal::COLUMNS),
                [id],
                StoredIdeal::from_row,
            )
            .optional()?
            .ok_or_else(|| Error::UnknownIdeal(id.to_string()))
    }

    /// Whether `annotator` is a member of the job's team.
    pub(crate) fn is_member(&self, team_id: &str, annotator_id: &str) -> Result<bool> {
        Ok(self
            .conn
            .query_row(
                "SELECT 1 FROM team_members WHERE team_id = ?1 AND annotator_id = ?2",
                [team_id, annotator_id],
                |_| Ok(()),
            )
            .optional()?
            .is_some())
    }
}

pub(crate) fn task_from_row(row: &Row<'_>) -> rusqlite::Result<Task> {
    Ok(Task {
        id: row.get(0)?,
        job_id: row.get(1)?,
        annotator_id: row.get(2)?,
        example_id: row.get(3)?,
        state: parse_column(row, 4, TaskState::parse)?,
    })
}
