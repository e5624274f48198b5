//! The public face of the core: every operation, each in one transaction.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::analytics::{self, ClassAgreement, PairAgreement, PrecisionRecall, ProgressReport, SeenMatrix};
use crate::catalog::{self, ContextGroup, DatasetDocument, ExampleInput};
use crate::error::Result;
use crate::export::{self, ExportFilter, ImportCounts};
use crate::interning::{self, PayloadInput};
use crate::model::{
    AnnotationIdeal, Annotator, ContextConfig, Dataset, Example, Job, JobState, JudgmentCause, PreAnnotation,
    ReviewJudgment, Schema, Scope, Task, Team, Verdict,
};
use crate::preannotation::{self, PreAnnotationCounts, PreAnnotationRow, RegexRule};
use crate::review::{self, AcceptOutcome, ConsolidatedView, LexicalGroup};
use crate::scheduler::{self, JobSpec, Submission, SubmissionReceipt, TaskPlan};
use crate::search::{self, SearchQuery, SearchResults, TrigramIndex};
use crate::store::{FaultPoint, Store, StoreOptions};

pub struct Platform {
    store: Store,
    // Readers take an Arc snapshot; writers build a new index and swap it in.
    indexes: RwLock<HashMap<String, Arc<TrigramIndex>>>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform").field("store", &self.store).finish_non_exhaustive()
    }
}

impl Platform {
    pub fn new(store: Store) -> Self {
        Self { store, indexes: RwLock::new(HashMap::new()) }
    }

    pub fn open(path: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        Ok(Self::new(Store::open(path, options)?))
    }

    pub fn in_memory(options: StoreOptions) -> Result<Self> {
        Ok(Self::new(Store::in_memory(options)?))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn inject_fault(&self, point: FaultPoint) {
        self.store.inject_fault(point);
    }

    // Catalog

    pub fn create_dataset(
        &self,
        name: &str,
        examples: &[ExampleInput],
        context_config: Option<&ContextConfig>,
    ) -> Result<Dataset> {
        let (dataset, stored) = self.store.write(|tx| catalog::insert_dataset(tx, name, examples, context_config))?;
        let index = TrigramIndex::build(&dataset.id, &stored)?;
        self.indexes.write().unwrap().insert(dataset.id.clone(), Arc::new(index));
        Ok(dataset)
    }

    pub fn import_dataset_document(&self, doc: &DatasetDocument, fallback_name: &str) -> Result<Dataset> {
        let name = doc.name.as_deref().unwrap_or(fallback_name);
        self.create_dataset(name, &doc.examples, doc.context_config.as_ref())
    }

    pub fn add_examples(&self, dataset_id: &str, examples: &[ExampleInput]) -> Result<Vec<Example>> {
        let stored = self.store.write(|tx| {
            tx.dataset(dataset_id)?;
            catalog::append_examples(tx, dataset_id, examples)
        })?;
        if stored.is_empty() {
            return Ok(stored);
        }
        let mut map = self.indexes.write().unwrap();
        if let Some(current) = map.get(dataset_id) {
            // A concurrent append may have landed first; if ordinals no longer
            // line up, drop the cache and let the next reader rebuild it.
            let expected = self.store.read(|tx| tx.example(dataset_id, &stored[0].id).map(|(_, o)| o))?;
            if current.doc_count() as i64 == expected {
                let mut next = (**current).clone();
                for example in &stored {
                    next.add_example(example)?;
                }
                map.insert(dataset_id.to_string(), Arc::new(next));
            } else {
                map.remove(dataset_id);
            }
        }
        Ok(stored)
    }

    pub fn dataset(&self, id: &str) -> Result<Dataset> {
        self.store.read(|tx| tx.dataset(id))
    }

    pub fn example(&self, dataset_id: &str, example_id: &str) -> Result<Example> {
        self.store.read(|tx| tx.example(dataset_id, example_id).map(|(e, _)| e))
    }

    pub fn examples(&self, dataset_id: &str, limit: usize, offset: usize) -> Result<Vec<Example>> {
        self.store.read(|tx| {
            tx.dataset(dataset_id)?;
            tx.examples(dataset_id, limit, offset)
        })
    }

    pub fn context_group(&self, dataset_id: &str, example_id: &str) -> Result<ContextGroup> {
        self.store.read(|tx| catalog::context_group(tx, dataset_id, example_id))
    }

    pub fn create_schema(&self, schema: Schema) -> Result<Schema> {
        self.store.write(|tx| catalog::insert_schema(tx, schema))
    }

    pub fn schema(&self, id: &str) -> Result<Schema> {
        self.store.read(|tx| tx.schema(id))
    }

    pub fn upsert_annotator(&self, annotator: Annotator) -> Result<Annotator> {
        self.store.write(|tx| catalog::upsert_annotator(tx, annotator))
    }

    pub fn annotator(&self, id: &str) -> Result<Annotator> {
        self.store.read(|tx| tx.annotator(id))
    }

    pub fn create_team(&self, name: &str, members: &[String]) -> Result<Team> {
        self.store.write(|tx| catalog::insert_team(tx, name, members))
    }

    pub fn add_team_member(&self, team_id: &str, annotator_id: &str) -> Result<Team> {
        self.store.write(|tx| catalog::add_member(tx, team_id, annotator_id))
    }

    pub fn team(&self, id: &str) -> Result<Team> {
        self.store.read(|tx| tx.team(id))
    }

    // Interning

    /// Returns the id of the ideal for `payload`, creating it on first use.
    pub fn intern_ideal(&self, dataset_id: &str, example_id: &str, schema_id: &str, payload: &PayloadInput) -> Result<String> {
        self.store.write(|tx| {
            let (example, _) = tx.example(dataset_id, example_id)?;
            let schema = tx.schema(schema_id)?;
            interning::intern(tx, dataset_id, &example, &schema, payload)
        })
    }

    pub fn ideal(&self, id: &str) -> Result<AnnotationIdeal> {
        self.store.read(|tx| tx.ideal(id).map(|i| i.to_ideal()))
    }

    // Scheduling

    pub fn create_job(&self, spec: &JobSpec) -> Result<(Job, TaskPlan)> {
        self.store.write(|tx| scheduler::create_job(tx, spec))
    }

    pub fn job(&self, id: &str) -> Result<Job> {
        self.store.read(|tx| tx.job(id))
    }

    pub fn set_job_state(&self, job_id: &str, state: JobState) -> Result<Job> {
        self.store.write(|tx| scheduler::set_job_state(tx, job_id, state))
    }

    pub fn tasks(&self, job_id: &str) -> Result<Vec<Task>> {
        self.store.read(|tx| {
            tx.job(job_id)?;
            let mut stmt = tx.conn.prepare_cached(
                "SELECT id, job_id, annotator_id, example_id, state FROM tasks WHERE job_id = ?1
                 ORDER BY annotator_id, example_id",
            )?;
            let rows = stmt.query_map([job_id], crate::store::task_from_row)?;
            Ok(rows.collect::<rusqlite::Result<_>>()?)
        })
    }

    pub fn task(&self, id: &str) -> Result<Task> {
        self.store.read(|tx| tx.task(id))
    }

    pub fn assign_task(&self, job_id: &str, annotator_id: &str, example_id: &str) -> Result<Task> {
        self.store.write(|tx| scheduler::assign_task(tx, job_id, annotator_id, example_id))
    }

    pub fn next_task(&self, job_id: &str, annotator_id: &str) -> Result<Option<Task>> {
        self.store.write(|tx| scheduler::next_task(tx, job_id, annotator_id))
    }

    pub fn revoke_lease(&self, task_id: &str) -> Result<Task> {
        self.store.write(|tx| scheduler::revoke_lease(tx, task_id))
    }

    pub fn submit_task(&self, task_id: &str, annotator_id: &str, submission: &Submission) -> Result<SubmissionReceipt> {
        self.store.write(|tx| scheduler::submit_task(tx, task_id, annotator_id, submission))
    }

    pub fn reprioritize(&self, job_id: &str) -> Result<BTreeMap<String, i64>> {
        self.store.write(|tx| scheduler::reprioritize(tx, job_id))
    }

    // Search

    /// Snapshot of the dataset's index, rebuilt from storage if not cached.
    pub fn index(&self, dataset_id: &str) -> Result<Arc<TrigramIndex>> {
        if let Some(index) = self.indexes.read().unwrap().get(dataset_id) {
            return Ok(index.clone());
        }
        let examples = self.store.read(|tx| {
            tx.dataset(dataset_id)?;
            tx.examples(dataset_id, usize::MAX, 0)
        })?;
        let index = Arc::new(TrigramIndex::build(dataset_id, &examples)?);
        let mut map = self.indexes.write().unwrap();
        Ok(map.entry(dataset_id.to_string()).or_insert(index).clone())
    }

    pub fn search(&self, dataset_id: &str, query: &SearchQuery) -> Result<SearchResults> {
        search::search(&*self.index(dataset_id)?, query)
    }

    // Review

    fn with_job<T>(
        &self,
        job_id: &str,
        write: bool,
        f: impl FnOnce(&crate::store::Tx<'_>, &Job, &Schema) -> Result<T>,
    ) -> Result<T> {
        let run = |tx: &crate::store::Tx<'_>| {
            let job = tx.job(job_id)?;
            let schema = tx.schema(&job.schema_id)?;
            f(tx, &job, &schema)
        };
        if write {
            self.store.write(run)
        } else {
            self.store.read(run)
        }
    }

    pub fn consolidate(&self, job_id: &str, example_id: &str, scope: Scope) -> Result<ConsolidatedView> {
        self.with_job(job_id, false, |tx, job, schema| review::consolidate(tx, job, schema, example_id, scope))
    }

    pub fn accept_ideal(&self, job_id: &str, ideal_id: &str, reviewer_id: &str) -> Result<AcceptOutcome> {
        self.with_job(job_id, true, |tx, job, schema| {
            review::accept(tx, job, schema, ideal_id, reviewer_id, JudgmentCause::Manual)
        })
    }

    pub fn reject_ideal(&self, job_id: &str, ideal_id: &str, reviewer_id: &str) -> Result<ReviewJudgment> {
        self.with_job(job_id, true, |tx, job, schema| {
            review::reject(tx, job, schema, ideal_id, reviewer_id, JudgmentCause::Manual)
        })
    }

    pub fn batch_accept_threshold(&self, job_id: &str, threshold: f64, reviewer_id: &str) -> Result<usize> {
        self.with_job(job_id, true, |tx, job, schema| {
            review::batch_accept_threshold(tx, job, schema, threshold, reviewer_id)
        })
    }

    pub fn lexical_groups(&self, job_id: &str, scope: Scope) -> Result<Vec<LexicalGroup>> {
        self.with_job(job_id, false, |tx, job, _| review::lexical_groups(tx, job, scope))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn batch_review_lexical(
        &self,
        job_id: &str,
        surface: &str,
        tag: &str,
        scope: Scope,
        verdict: Verdict,
        reviewer_id: &str,
    ) -> Result<Vec<ReviewJudgment>> {
        self.with_job(job_id, true, |tx, job, schema| {
            review::batch_review_lexical(tx, job, schema, surface, tag, scope, verdict, reviewer_id)
        })
    }

    /// Live judgments of the job, keyed by ideal id.
    pub fn judgments(&self, job_id: &str) -> Result<BTreeMap<String, ReviewJudgment>> {
        self.store.read(|tx| {
            tx.job(job_id)?;
            Ok(review::live_judgments(tx, job_id)?.into_iter().collect())
        })
    }

    pub fn accepted_ideals(&self, job_id: &str) -> Result<Vec<String>> {
        self.store.read(|tx| review::accepted_ideals(tx, job_id))
    }

    // Analytics

    pub fn seen_matrix(&self, job_id: &str) -> Result<SeenMatrix> {
        self.store.read(|tx| {
            tx.job(job_id)?;
            analytics::seen_matrix(tx, job_id)
        })
    }

    pub fn pairwise_span_agreement(&self, job_id: &str, a: &str, b: &str) -> Result<PairAgreement> {
        self.store.read(|tx| analytics::pairwise_span_agreement(tx, job_id, a, b))
    }

    pub fn all_pairwise_span_agreement(&self, job_id: &str) -> Result<Vec<PairAgreement>> {
        self.store.read(|tx| {
            tx.job(job_id)?;
            analytics::all_pairs(tx, job_id)
        })
    }

    pub fn classification_agreement(&self, job_id: &str) -> Result<ClassAgreement> {
        self.with_job(job_id, false, |tx, job, _| analytics::classification_agreement(tx, job))
    }

    pub fn precision_recall(&self, job_id: &str, source: &str) -> Result<PrecisionRecall> {
        self.store.read(|tx| analytics::precision_recall(tx, job_id, source))
    }

    pub fn progress(&self, job_id: &str, window_minutes: u64) -> Result<ProgressReport> {
        self.progress_at(job_id, self.store.now_ms(), window_minutes)
    }

    pub fn progress_at(&self, job_id: &str, now_ms: i64, window_minutes: u64) -> Result<ProgressReport> {
        self.store.read(|tx| analytics::progress(tx, job_id, now_ms, window_minutes))
    }

    // Pre-annotations

    pub fn upload_preannotations(&self, job_id: &str, rows: &[PreAnnotationRow]) -> Result<PreAnnotationCounts> {
        self.with_job(job_id, true, |tx, job, _| preannotation::upload(tx, job, rows))
    }

    pub fn run_regex_preannotator(&self, job_id: &str, rules: &[RegexRule]) -> Result<PreAnnotationCounts> {
        let dataset_id = self.job(job_id)?.dataset_id;
        let index = self.index(&dataset_id)?;
        self.with_job(job_id, true, |tx, job, _| preannotation::run_regex(tx, job, &index, rules))
    }

    pub fn preannotations(&self, job_id: &str, example_id: Option<&str>) -> Result<Vec<PreAnnotation>> {
        self.store.read(|tx| {
            tx.job(job_id)?;
            preannotation::list(tx, job_id, example_id)
        })
    }

    // Export

    pub fn export_job(&self, job_id: &str, filter: ExportFilter) -> Result<String> {
        self.store.read(|tx| export::export(tx, job_id, filter))
    }

    pub fn wipe_job_annotations(&self, job_id: &str) -> Result<usize> {
        self.store.write(|tx| export::wipe(tx, job_id))
    }

    pub fn import_job(&self, job_id: &str, jsonl: &str) -> Result<ImportCounts> {
        self.store.write(|tx| export::import(tx, job_id, jsonl))
    }

    pub fn integrity_violations(&self) -> Result<Vec<String>> {
        self.store.integrity_violations()
    }

    pub fn fingerprint(&self) -> Result<Vec<String>> {
        self.store.fingerprint()
    }
}

impl From<Store> for Platform {
    fn from(store: Store) -> Self {
        Self::new(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn platform_is_shareable() {
        fn is_sync<T: Send + Sync>() {}
        is_sync::<Platform>();
    }
}
