#![allow(dead_code)]

use std::sync::Arc;

use tagmill_core::catalog::ExampleInput;
use tagmill_core::clock::SteppingClock;
use tagmill_core::interning::PayloadInput;
use tagmill_core::model::{Annotator, AnnotatorKind, Job, Schema, Task};
use tagmill_core::scheduler::{JobSpec, Submission};
use tagmill_core::{Platform, StoreOptions};

pub fn platform() -> Platform {
    Platform::in_memory(StoreOptions {
        id_seed: Some(7),
        clock: Some(Arc::new(SteppingClock::new(1_767_225_600_000, 1_000))),
    })
    .unwrap()
}

pub fn examples(docs: &[&str]) -> Vec<ExampleInput> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| ExampleInput { id: Some(format!("ex{i:02}")), content: d.to_string(), metadata: Default::default() })
        .collect()
}

pub fn annotators(p: &Platform, prefix: &str, n: usize, kind: AnnotatorKind) -> Vec<String> {
    (0..n)
        .map(|i| {
            let id = format!("{prefix}{i}");
            p.upsert_annotator(Annotator { id: id.clone(), display_name: id.clone(), kind }).unwrap();
            id
        })
        .collect()
}

pub struct Fixture {
    pub dataset: String,
    pub schema: String,
    pub team: String,
    pub members: Vec<String>,
    pub job: Job,
}

pub fn fixture(p: &Platform, docs: &[&str], schema: Schema, team_size: usize, redundancy: usize) -> Fixture {
    let dataset = p.create_dataset("corpus", &examples(docs), None).unwrap();
    let schema = p.create_schema(schema).unwrap();
    let members = annotators(p, "ann", team_size, AnnotatorKind::Human);
    let team = p.create_team("team", &members).unwrap();
    let (job, _) = p
        .create_job(&JobSpec {
            dataset_id: dataset.id.clone(),
            schema_id: schema.id.clone(),
            team_id: team.id.clone(),
            redundancy,
            seed: 11,
        })
        .unwrap();
    Fixture { dataset: dataset.id, schema: schema.id, team: team.id, members, job }
}

pub fn span(start: usize, end: usize, tag: &str) -> PayloadInput {
    PayloadInput::Span { start, end, tag: tag.into() }
}

pub fn class(c: &str) -> PayloadInput {
    PayloadInput::Class { class: c.into() }
}

/// Leases every task of `annotator` and submits what `choose` returns for it.
pub fn work_through(p: &Platform, job: &str, annotator: &str, mut choose: impl FnMut(&Task) -> Vec<PayloadInput>) -> usize {
    let mut n = 0;
    while let Some(task) = p.next_task(job, annotator).unwrap() {
        let payloads = choose(&task);
        p.submit_task(&task.id, annotator, &Submission { payloads, ..Default::default() }).unwrap();
        n += 1;
    }
    n
}
