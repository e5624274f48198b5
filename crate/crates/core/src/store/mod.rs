//! Relational persistence on SQLite.
//!
//! Every mutating operation runs inside one `BEGIN IMMEDIATE` transaction on a
//! single connection, so task-state transitions, submissions and review
//! verdicts are serializable. Uniqueness (ideal interning, one event per
//! ideal and task, one live judgment per ideal and job) is enforced by the
//! schema, not by callers.

mod rows;

use std::path::Path;
use std::sync::{Arc, Mutex};

use rusqlite::{Connection, TransactionBehavior};
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, IdSource, SystemClock};
use crate::error::{Error, Result};

pub(crate) use rows::{task_from_row, StoredIdeal};

const SCHEMA_SQL: &str = r#"
CREATE TABLE IF NOT EXISTS datasets (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    group_by TEXT,
    sort_by TEXT,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS examples (
    dataset_id TEXT NOT NULL REFERENCES datasets(id),
    id TEXT NOT NULL,
    ordinal INTEGER NOT NULL,
    content TEXT NOT NULL CHECK (length(content) > 0),
    content_len INTEGER NOT NULL,
    metadata TEXT NOT NULL,
    PRIMARY KEY (dataset_id, id),
    UNIQUE (dataset_id, ordinal)
);
CREATE TABLE IF NOT EXISTS schemas (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    body TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS annotators (
    id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    kind TEXT NOT NULL CHECK (kind IN ('human', 'model'))
);
CREATE TABLE IF NOT EXISTS teams (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS team_members (
    team_id TEXT NOT NULL REFERENCES teams(id),
    annotator_id TEXT NOT NULL REFERENCES annotators(id),
    position INTEGER NOT NULL,
    PRIMARY KEY (team_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS jobs (
    id TEXT PRIMARY KEY,
    dataset_id TEXT NOT NULL REFERENCES datasets(id),
    schema_id TEXT NOT NULL REFERENCES schemas(id),
    team_id TEXT NOT NULL REFERENCES teams(id),
    redundancy INTEGER NOT NULL CHECK (redundancy > 0),
    state TEXT NOT NULL CHECK (state IN ('open', 'complete', 'archived')),
    seed INTEGER NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS job_examples (
    job_id TEXT NOT NULL REFERENCES jobs(id),
    example_id TEXT NOT NULL,
    priority INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (job_id, example_id)
);
CREATE TABLE IF NOT EXISTS tasks (
    id TEXT PRIMARY KEY,
    job_id TEXT NOT NULL REFERENCES jobs(id),
    annotator_id TEXT NOT NULL REFERENCES annotators(id),
    example_id TEXT NOT NULL,
    state TEXT NOT NULL CHECK (state IN ('pending', 'leased', 'submitted')),
    submitted_at INTEGER,
    UNIQUE (job_id, annotator_id, example_id)
);
CREATE INDEX IF NOT EXISTS tasks_by_example ON tasks (job_id, example_id);
CREATE INDEX IF NOT EXISTS tasks_by_annotator ON tasks (job_id, annotator_id, state);
CREATE TABLE IF NOT EXISTS ideals (
    id TEXT PRIMARY KEY,
    dataset_id TEXT NOT NULL,
    example_id TEXT NOT NULL,
    kind TEXT NOT NULL CHECK (kind IN ('span', 'class', 'relation')),
    span_start INTEGER,
    span_end INTEGER,
    label TEXT,
    node_key TEXT,
    canonical TEXT NOT NULL,
    UNIQUE (dataset_id, example_id, canonical),
    FOREIGN KEY (dataset_id, example_id) REFERENCES examples(dataset_id, id)
);
CREATE INDEX IF NOT EXISTS ideals_by_position ON ideals (dataset_id, example_id, kind, span_start);
CREATE TABLE IF NOT EXISTS events (
    id TEXT PRIMARY KEY,
    ideal_id TEXT NOT NULL REFERENCES ideals(id),
    task_id TEXT NOT NULL REFERENCES tasks(id),
    source TEXT NOT NULL CHECK (source IN ('annotator', 'pre-annotation-accept')),
    created_at INTEGER NOT NULL,
    UNIQUE (ideal_id, task_id)
);
CREATE INDEX IF NOT EXISTS events_by_task ON events (task_id);
CREATE TABLE IF NOT EXISTS preannotations (
    id TEXT PRIMARY KEY,
    ideal_id TEXT NOT NULL REFERENCES ideals(id),
    job_id TEXT NOT NULL REFERENCES jobs(id),
    origin_kind TEXT NOT NULL CHECK (origin_kind IN ('rule', 'model')),
    origin_id TEXT NOT NULL,
    state TEXT NOT NULL CHECK (state IN ('pending', 'accepted', 'rejected')),
    UNIQUE (job_id, ideal_id)
);
CREATE TABLE IF NOT EXISTS judgments (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    id TEXT NOT NULL UNIQUE,
    job_id TEXT NOT NULL REFERENCES jobs(id),
    ideal_id TEXT NOT NULL REFERENCES ideals(id),
    reviewer_id TEXT NOT NULL,
    verdict TEXT NOT NULL CHECK (verdict IN ('accepted', 'rejected')),
    cause TEXT NOT NULL CHECK (cause IN ('manual', 'threshold-batch', 'transitive', 'lexical-batch')),
    caused_by TEXT REFERENCES ideals(id),
    created_at INTEGER NOT NULL,
    live INTEGER NOT NULL CHECK (live IN (0, 1)),
    CHECK ((cause = 'transitive') = (caused_by IS NOT NULL))
);
CREATE UNIQUE INDEX IF NOT EXISTS judgments_one_live ON judgments (job_id, ideal_id) WHERE live = 1;
CREATE INDEX IF NOT EXISTS judgments_by_cause ON judgments (job_id, caused_by) WHERE live = 1;
"#;

const TABLES: &[&str] = &[
    "datasets",
    "examples",
    "schemas",
    "annotators",
    "teams",
    "team_members",
    "jobs",
    "job_examples",
    "tasks",
    "ideals",
    "events",
    "preannotations",
    "judgments",
];

/// Named points inside multi-step writes where a test can force a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultPoint {
    /// After the first events of a submission are written.
    SubmitMidway,
    /// After the first ideal of a threshold batch is accepted.
    BatchAcceptMidway,
    /// After the first ideal of a lexical batch is judged.
    LexicalReviewMidway,
    /// After the first row of a pre-annotation upload is stored.
    PreannotationUploadMidway,
    /// After the first line of an annotation import is stored.
    ImportMidway,
}

#[derive(Default)]
pub struct StoreOptions {
    /// Seed for deterministic ids. `None` uses random v4 UUIDs.
    pub id_seed: Option<u64>,
    pub clock: Option<Arc<dyn Clock>>,
}

pub struct Store {
    conn: Mutex<Connection>,
    ids: IdSource,
    clock: Arc<dyn Clock>,
    faults: Mutex<Vec<FaultPoint>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("ids", &self.ids).finish_non_exhaustive()
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        Self::init(Connection::open(path)?, options)
    }

    pub fn in_memory(options: StoreOptions) -> Result<Self> {
        Self::init(Connection::open_in_memory()?, options)
    }

    fn init(conn: Connection, options: StoreOptions) -> Result<Self> {
        conn.execute_batch("PRAGMA foreign_keys = ON; PRAGMA journal_mode = WAL;")?;
        conn.execute_batch(SCHEMA_SQL)?;
        Ok(Self {
            conn: Mutex::new(conn),
            ids: options.id_seed.map(IdSource::seeded).unwrap_or(IdSource::Random),
            clock: options.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            faults: Mutex::new(Vec::new()),
        })
    }

    pub fn now_ms(&self) -> i64 {
        self.clock.now_ms()
    }

    /// Runs `f` in an immediate transaction, committing on `Ok`.
    pub(crate) fn write<T>(&self, f: impl FnOnce(&Tx<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let value = f(&Tx { conn: &tx, store: self })?;
        tx.commit()?;
        Ok(value)
    }

    /// Runs `f` in a read transaction so it sees one consistent snapshot.
    pub(crate) fn read<T>(&self, f: impl FnOnce(&Tx<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let tx = conn.transaction_with_behavior(TransactionBehavior::Deferred)?;
        f(&Tx { conn: &tx, store: self })
    }

    /// Arms a one-shot failure at `point`. The next write that reaches it fails
    /// with [`Error::InjectedFault`] and rolls back.
    pub fn inject_fault(&self, point: FaultPoint) {
        self.faults.lock().unwrap_or_else(|e| e.into_inner()).push(point);
    }

    /// Every row of every table, rendered as text and sorted. Two stores with
    /// equal fingerprints hold the same data.
    pub fn fingerprint(&self) -> Result<Vec<String>> {
        self.read(|tx| {
            let mut out = Vec::new();
            for table in TABLES {
                let mut stmt = tx.conn.prepare(&format!("SELECT * FROM {table}"))?;
                let columns = stmt.column_count();
                let mut rows = stmt.query([])?;
                let mut lines = Vec::new();
                while let Some(row) = rows.next()? {
                    let mut line = format!("{table}:");
                    for i in 0..columns {
                        let value: rusqlite::types::Value = row.get(i)?;
                        line.push_str(&format!(" {value:?}"));
                    }
                    lines.push(line);
                }
                lines.sort();
                out.extend(lines);
            }
            Ok(out)
        })
    }

    /// Referential checks the schema cannot express. Empty when consistent.
    pub fn integrity_violations(&self) -> Result<Vec<String>> {
        self.read(|tx| {
            let mut out = Vec::new();
            let checks: &[(&str, &str)] = &[
                (
                    "event without task or ideal",
                    "SELECT e.id FROM events e
                     LEFT JOIN tasks t ON t.id = e.task_id
                     LEFT JOIN ideals i ON i.id = e.ideal_id
                     WHERE t.id IS NULL OR i.id IS NULL",
                ),
                (
                    "event task and ideal on different examples",
                    "SELECT e.id FROM events e
                     JOIN tasks t ON t.id = e.task_id
                     JOIN jobs j ON j.id = t.job_id
                     JOIN ideals i ON i.id = e.ideal_id
                     WHERE i.example_id != t.example_id OR i.dataset_id != j.dataset_id",
                ),
                (
                    "event on unsubmitted task",
                    "SELECT e.id FROM events e JOIN tasks t ON t.id = e.task_id
                     WHERE t.state != 'submitted'",
                ),
                (
                    "task on example outside the job dataset",
                    "SELECT t.id FROM tasks t JOIN jobs j ON j.id = t.job_id
                     LEFT JOIN examples x ON x.dataset_id = j.dataset_id AND x.id = t.example_id
                     WHERE x.id IS NULL",
                ),
                (
                    "example with more tasks than the job redundancy",
                    "SELECT t.job_id || '/' || t.example_id FROM tasks t JOIN jobs j ON j.id = t.job_id
                     GROUP BY t.job_id, t.example_id, j.redundancy HAVING count(*) > j.redundancy",
                ),
                (
                    "transitive judgment without an accepted cause",
                    "SELECT jd.id FROM judgments jd
                     LEFT JOIN judgments cause ON cause.job_id = jd.job_id
                         AND cause.ideal_id = jd.caused_by AND cause.live = 1
                         AND cause.verdict = 'accepted'
                     WHERE jd.live = 1 AND jd.cause = 'transitive' AND cause.id IS NULL",
                ),
            ];
            for (label, sql) in checks {
                let mut stmt = tx.conn.prepare(sql)?;
                let ids = stmt.query_map([], |r| r.get::<_, String>(0))?;
                for id in ids {
                    out.push(format!("{label}: {}", id?));
                }
            }
            Ok(out)
        })
    }
}

/// A live transaction plus the store's id and clock sources.
pub(crate) struct Tx<'a> {
    pub(crate) conn: &'a rusqlite::Transaction<'a>,
    store: &'a Store,
}

impl Tx<'_> {
    pub(crate) fn new_id(&self) -> String {
        self.store.ids.next_id()
    }

    pub(crate) fn now_ms(&self) -> i64 {
        self.store.clock.now_ms()
    }

    /// Fails with [`Error::InjectedFault`] if `point` is armed.
    pub(crate) fn checkpoint(&self, point: FaultPoint) -> Result<()> {
        let mut faults = self.store.faults.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(pos) = faults.iter().position(|p| *p == point) {
            faults.remove(pos);
            return Err(Error::InjectedFault(point));
        }
        Ok(())
    }
}
