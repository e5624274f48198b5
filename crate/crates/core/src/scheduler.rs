//! Work distribution: every example of a job is annotated by exactly M
//! distinct team members, with per-annotator load differing by at most one.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interning::{intern, PayloadInput};
use crate::model::{payloads_conflict, IdealKind, Job, JobState, Task, TaskState};
use crate::store::{FaultPoint, StoredIdeal, Tx};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub job_id: String,
    /// `(example id, annotator id)` pairs.
    pub assignments: Vec<(String, String)>,
    /// Larger runs sooner.
    pub priorities: BTreeMap<String, i64>,
}

/// Round-robin over the team along a seeded shuffle of the examples.
///
/// Consecutive runs of `redundancy` annotators (modulo team size) are
/// distinct because `redundancy <= team.len()`, and the cyclic walk hands
/// out `N * M` slots so loads differ by at most one.
pub fn plan_tasks(
    job_id: &str,
    examples: &[String],
    team: &[String],
    redundancy: usize,
    seed: u64,
) -> Result<TaskPlan> {
    if redundancy > team.len() {
        return Err(Error::RedundancyExceedsTeam { redundancy, team_size: team.len() });
    }
    if redundancy == 0 {
        return Err(Error::InvalidPlan("redundancy must be at least 1".into()));
    }
    if examples.is_empty() {
        return Err(Error::InvalidPlan("no examples to assign".into()));
    }
    let mut order: Vec<&String> = examples.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut assignments = Vec::with_capacity(examples.len() * redundancy);
    let mut slot = 0usize;
    for example in order {
        for _ in 0..redundancy {
            assignments.push((example.clone(), team[slot % team.len()].clone()));
            slot += 1;
        }
    }
    let priorities = examples.iter().map(|e| (e.clone(), 0)).collect();
    Ok(TaskPlan { job_id: job_id.to_string(), assignments, priorities })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub dataset_id: String,
    pub schema_id: String,
    pub team_id: String,
    pub redundancy: usize,
    #[serde(default)]
    pub seed: u64,
}

pub(crate) fn create_job(tx: &Tx<'_>, spec: &JobSpec) -> Result<(Job, TaskPlan)> {
    tx.dataset(&spec.dataset_id)?;
    tx.schema(&spec.schema_id)?;
    let team = tx.team(&spec.team_id)?;
    let examples = tx.example_ordinals(&spec.dataset_id)?;
    let id = tx.new_id();
    let plan = plan_tasks(&id, &examples, &team.members, spec.redundancy, spec.seed)?;
    tx.conn.execute(
        "INSERT INTO jobs (id, dataset_id, schema_id, team_id, redundancy, state, seed, created_at)
         VALUES (?1, ?2, ?3, ?4, ?5, 'open', ?6, ?7)",
        params![
            id,
            spec.dataset_id,
            spec.schema_id,
            spec.team_id,
            spec.redundancy as i64,
            spec.seed as i64,
            tx.now_ms()
        ],
    )?;
    let mut priority = tx.conn.prepare_cached(
        "INSERT INTO job_examples (job_id, example_id, priority) VALUES (?1, ?2, ?3)",
    )?;
    for (example, p) in &plan.priorities {
        priority.execute(params![id, example, p])?;
    }
    let mut task = tx.conn.prepare_cached(
        "INSERT INTO tasks (id, job_id, annotator_id, example_id, state) VALUES (?1, ?2, ?3, ?4, 'pending')",
    )?;
    for (example, annotator) in &plan.assignments {
        task.execute(params![tx.new_id(), id, annotator, example])?;
    }
    Ok((tx.job(&id)?, plan))
}

pub(crate) fn set_job_state(tx: &Tx<'_>, job_id: &str, state: JobState) -> Result<Job> {
    tx.job(job_id)?;
    if state == JobState::Complete {
        let open: i64 = tx.conn.query_row(
            "SELECT count(*) FROM tasks WHERE job_id = ?1 AND state != 'submitted'",
            [job_id],
            |r| r.get(0),
        )?;
        if open > 0 {
            return Err(Error::JobIncomplete(job_id.to_string()));
        }
    }
    tx.conn.execute("UPDATE jobs SET state = ?2 WHERE id = ?1", params![job_id, state.as_str()])?;
    tx.job(job_id)
}

/// Adds one task outside the plan, e.g. for examples appended after the job
/// was created. Keeps the at-most-M-annotators-per-example bound.
pub(crate) fn assign_task(tx: &Tx<'_>, job_id: &str, annotator_id: &str, example_id: &str) -> Result<Task> {
    let job = tx.job(job_id)?;
    tx.example(&job.dataset_id, example_id)?;
    if !tx.is_member(&job.team_id, annotator_id)? {
        return Err(Error::NotTeamMember { job: job_id.into(), annotator: annotator_id.into() });
    }
    let existing: i64 = tx.conn.query_row(
        "SELECT count(*) FROM tasks WHERE job_id = ?1 AND example_id = ?2",
        [job_id, example_id],
        |r| r.get(0),
    )?;
    if existing as usize >= job.redundancy {
        return Err(Error::ExampleSaturated {
            job: job_id.into(),
            example: example_id.into(),
            redundancy: job.redundancy,
        });
    }
    tx.conn.execute(
        "INSERT OR IGNORE INTO job_examples (job_id, example_id, priority) VALUES (?1, ?2, 0)",
        [job_id, example_id],
    )?;
    let id = tx.new_id();
    let inserted = tx.conn.execute(
        "INSERT OR IGNORE INTO tasks (id, job_id, annotator_id, example_id, state)
         VALUES (?1, ?2, ?3, ?4, 'pending')",
        params![id, job_id, annotator_id, example_id],
    )?;
    if inserted == 0 {
        return Err(Error::DuplicateTask { annotator: annotator_id.into(), example: example_id.into() });
    }
    tx.task(&id)
}

/// Leases the highest-priority pending task of `annotator_id`, ties broken by
/// example upload order.
pub(crate) fn next_task(tx: &Tx<'_>, job_id: &str, annotator_id: &str) -> Result<Option<Task>> {
    let job = tx.job(job_id)?;
    if !tx.is_member(&job.team_id, annotator_id)? {
        return Err(Error::NotTeamMember { job: job_id.into(), annotator: annotator_id.into() });
    }
    if job.state != JobState::Open {
        return Ok(None);
    }
    let id: Option<String> = tx
        .conn
        .query_row(
            "SELECT t.id FROM tasks t
             JOIN job_examples je ON je.job_id = t.job_id AND je.example_id = t.example_id
             JOIN examples x ON x.dataset_id = ?3 AND x.id = t.example_id
             WHERE t.job_id = ?1 AND t.annotator_id = ?2 AND t.state = 'pending'
             ORDER BY je.priority DESC, x.ordinal ASC
             LIMIT 1",
            params![job_id, annotator_id, job.dataset_id],
            |r| r.get(0),
        )
        .optional()?;
    let Some(id) = id else { return Ok(None) };
    let updated = tx
        .conn
        .execute("UPDATE tasks SET state = 'leased' WHERE id = ?1 AND state = 'pending'", [&id])?;
    debug_assert_eq!(updated, 1);
    tx.task(&id).map(Some)
}

pub(crate) fn revoke_lease(tx: &Tx<'_>, task_id: &str) -> Result<Task> {
    let task = tx.task(task_id)?;
    if task.state != TaskState::Leased {
        return Err(Error::TaskNotLeased(task_id.to_string()));
    }
    tx.conn.execute("UPDATE tasks SET state = 'pending' WHERE id = ?1", [task_id])?;
    tx.task(task_id)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    #[serde(default)]
    pub payloads: Vec<PayloadInput>,
    #[serde(default)]
    pub accepted_preannotations: Vec<String>,
    #[serde(default)]
    pub rejected_preannotations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub task_id: String,
    /// Ideal asserted by each recorded event, in submission order.
    pub ideal_ids: Vec<String>,
    pub event_ids: Vec<String>,
    pub new_ideals: usize,
}

pub(crate) fn submit_task(
    tx: &Tx<'_>,
    task_id: &str,
    annotator_id: &str,
    submission: &Submission,
) -> Result<SubmissionReceipt> {
    let task = tx.task(task_id)?;
    if task.state != TaskState::Leased {
        return Err(Error::TaskNotLeased(task_id.to_string()));
    }
    if task.annotator_id != annotator_id {
        return Err(Error::NotTaskOwner { task: task_id.to_string() });
    }
    let job = tx.job(&task.job_id)?;
    if job.state != JobState::Open {
        return Err(Error::JobNotOpen(job.id));
    }
    let schema = tx.schema(&job.schema_id)?;
    let (example, _) = tx.example(&job.dataset_id, &task.example_id)?;
    let count_ideals = || -> Result<i64> {
        Ok(tx.conn.query_row(
            "SELECT count(*) FROM ideals WHERE dataset_id = ?1 AND example_id = ?2",
            [&job.dataset_id, &example.id],
            |r| r.get(0),
        )?)
    };
    let before = count_ideals()?;

    let mut asserted: Vec<(String, &'static str)> = Vec::new();
    for payload in &submission.payloads {
        let id = intern(tx, &job.dataset_id, &example, &schema, payload)?;
        if !asserted.iter().any(|(existing, _)| *existing == id) {
            asserted.push((id, "annotator"));
        }
    }
    for pre_id in &submission.accepted_preannotations {
        let ideal_id = claim_preannotation(tx, &job.id, &example.id, pre_id, "accepted")?;
        if !asserted.iter().any(|(existing, _)| *existing == ideal_id) {
            asserted.push((ideal_id, "pre-annotation-accept"));
        }
    }
    for pre_id in &submission.rejected_preannotations {
        claim_preannotation(tx, &job.id, &example.id, pre_id, "rejected")?;
    }
    if schema.classification_mode == crate::model::ClassificationMode::SingleLabel {
        let mut classes = 0;
        for (id, _) in &asserted {
            if tx.ideal(id)?.payload.kind() == IdealKind::Class {
                classes += 1;
            }
        }
        if classes > 1 {
            return Err(Error::InvalidPayload(
                "single-label schema allows one class per submission".into(),
            ));
        }
    }

    let now = tx.now_ms();
    let mut event_ids = Vec::with_capacity(asserted.len());
    let mut insert = tx.conn.prepare_cached(
        "INSERT INTO events (id, ideal_id, task_id, source, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
    )?;
    for (i, (ideal_id, source)) in asserted.iter().enumerate() {
        let id = tx.new_id();
        insert.execute(params![id, ideal_id, task_id, source, now])?;
        event_ids.push(id);
        if i == 0 {
            tx.checkpoint(FaultPoint::SubmitMidway)?;
        }
    }
    tx.conn.execute(
        "UPDATE tasks SET state = 'submitted', submitted_at = ?2 WHERE id = ?1",
        params![task_id, now],
    )?;
    let ids: Vec<String> = asserted.iter().map(|(id, _)| id.clone()).collect();
    crate::review::apply_existing_verdicts(tx, &job, &schema, &ids)?;
    let after = count_ideals()?;
    Ok(SubmissionReceipt {
        task_id: task_id.to_string(),
        ideal_ids: asserted.into_iter().map(|(id, _)| id).collect(),
        event_ids,
        new_ideals: (after - before) as usize,
    })
}

fn claim_preannotation(tx: &Tx<'_>, job_id: &str, example_id: &str, pre_id: &str, state: &str) -> Result<String> {
    let row: Option<(String, String)> = tx
        .conn
        .query_row(
            "SELECT p.ideal_id, i.example_id FROM preannotations p JOIN ideals i ON i.id = p.ideal_id
             WHERE p.id = ?1 AND p.job_id = ?2",
            [pre_id, job_id],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )
        .optional()?;
    let Some((ideal_id, on_example)) = row else {
        return Err(Error::UnknownPreAnnotation(pre_id.to_string()));
    };
    if on_example != example_id {
        return Err(Error::InvalidPayload(format!("pre-annotation {pre_id} is on another example")));
    }
    tx.conn.execute("UPDATE preannotations SET state = ?2 WHERE id = ?1", [pre_id, state])?;
    Ok(ideal_id)
}

/// Ideals with at least one event in the job, grouped by example.
pub(crate) fn job_ideals_by_example(tx: &Tx<'_>, job_id: &str) -> Result<HashMap<String, Vec<StoredIdeal>>> {
    let mut stmt = tx.conn.prepare_cached(
        "SELECT DISTINCT i.id, i.dataset_id, i.example_id, i.canonical FROM ideals i
         JOIN events e ON e.ideal_id = i.id JOIN tasks t ON t.id = e.task_id
         WHERE t.job_id = ?1 ORDER BY i.id",
    )?;
    let mut out: HashMap<String, Vec<StoredIdeal>> = HashMap::new();
    for ideal in stmt.query_map([job_id], StoredIdeal::from_row)? {
        let ideal = ideal?;
        out.entry(ideal.example_id.clone()).or_default().push(ideal);
    }
    Ok(out)
}

/// Sets each example's priority to 1 when its submitted ideals contain a
/// conflicting pair and 0 otherwise. Running it again without new
/// submissions changes nothing.
pub(crate) fn reprioritize(tx: &Tx<'_>, job_id: &str) -> Result<BTreeMap<String, i64>> {
    let job = tx.job(job_id)?;
    let schema = tx.schema(&job.schema_id)?;
    let ideals = job_ideals_by_example(tx, job_id)?;
    let mut stmt = tx.conn.prepare_cached("SELECT example_id FROM job_examples WHERE job_id = ?1")?;
    let examples: Vec<String> = stmt.query_map([job_id], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    let mut update =
        tx.conn.prepare_cached("UPDATE job_examples SET priority = ?3 WHERE job_id = ?1 AND example_id = ?2")?;
    let mut out = BTreeMap::new();
    for example in examples {
        let contested = ideals.get(&example).is_some_and(|list| {
            list.iter().enumerate().any(|(i, a)| {
                list[i + 1..]
                    .iter()
                    .any(|b| payloads_conflict(&a.payload, &b.payload, schema.classification_mode))
            })
        });
        let priority = i64::from(contested);
        update.execute(params![job_id, example, priority])?;
        out.insert(example, priority);
    }
    Ok(out)
}
