mod common;

use common::*;
use tagmill_core::export::ExportFilter;
use tagmill_core::model::{PreAnnotationOrigin, Schema, Scope, Verdict};
use tagmill_core::preannotation::PreAnnotationRow;
use tagmill_core::scheduler::Submission;
use tagmill_core::{Error, FaultPoint, Platform};

const DOCS: &[&str] = &["Acme Corp hired Bob.", "Acme Corp fired Eve.", "Nothing here at all."];

/// Runs `op` with a fault armed and checks storage is untouched, then runs
/// it again without the fault.
fn check<T: std::fmt::Debug>(p: &Platform, point: FaultPoint, op: impl Fn() -> tagmill_core::Result<T>) -> T {
    let before = p.fingerprint().unwrap();
    p.inject_fault(point);
    match op() {
        Err(Error::InjectedFault(at)) => assert_eq!(at, point),
        other => panic!("expected injected fault at {point:?}, got {other:?}"),
    }
    assert_eq!(p.fingerprint().unwrap(), before, "{point:?} left partial writes");
    op().unwrap()
}

fn annotated() -> (Platform, Fixture) {
    let p = platform();
    let f = fixture(&p, DOCS, Schema::with_tags("s", &["ORG", "PER"]), 2, 2);
    for a in f.members.clone() {
        work_through(&p, &f.job.id, &a, |_| vec![span(0, 9, "ORG"), span(16, 19, "PER")]);
    }
    (p, f)
}

#[test]
fn submit_is_all_or_nothing() {
    let p = platform();
    let f = fixture(&p, DOCS, Schema::with_tags("s", &["ORG", "PER"]), 1, 1);
    let a = &f.members[0];
    let task = p.next_task(&f.job.id, a).unwrap().unwrap();
    let sub = Submission { payloads: vec![span(0, 9, "ORG"), span(16, 19, "PER")], ..Default::default() };
    let receipt = check(&p, FaultPoint::SubmitMidway, || p.submit_task(&task.id, a, &sub));
    assert_eq!(receipt.event_ids.len(), 2);
}

#[test]
fn batch_accept_is_all_or_nothing() {
    let (p, f) = annotated();
    let accepted = check(&p, FaultPoint::BatchAcceptMidway, || p.batch_accept_threshold(&f.job.id, 1.0, "rev"));
    assert_eq!(accepted, 6);
}

#[test]
fn lexical_review_is_all_or_nothing() {
    let (p, f) = annotated();
    let out = check(&p, FaultPoint::LexicalReviewMidway, || {
        p.batch_review_lexical(&f.job.id, "Acme Corp", "ORG", Scope::All, Verdict::Accepted, "rev")
    });
    assert_eq!(out.len(), 2);
}

#[test]
fn preannotation_upload_is_all_or_nothing() {
    let p = platform();
    let f = fixture(&p, DOCS, Schema::with_tags("s", &["ORG", "PER"]), 1, 1);
    let rows: Vec<PreAnnotationRow> = ["ex00", "ex01"]
        .iter()
        .map(|e| PreAnnotationRow {
            example_id: e.to_string(),
            payload: span(0, 9, "ORG"),
            origin: PreAnnotationOrigin::Model("m1".into()),
        })
        .collect();
    let counts = check(&p, FaultPoint::PreannotationUploadMidway, || p.upload_preannotations(&f.job.id, &rows));
    assert_eq!(counts.created, 2);
}

#[test]
fn preannotation_upload_with_a_bad_row_writes_nothing() {
    let p = platform();
    let f = fixture(&p, DOCS, Schema::with_tags("s", &["ORG"]), 1, 1);
    let before = p.fingerprint().unwrap();
    let rows = vec![
        PreAnnotationRow { example_id: "ex00".into(), payload: span(0, 9, "ORG"), origin: PreAnnotationOrigin::Rule("r".into()) },
        PreAnnotationRow { example_id: "missing".into(), payload: span(0, 9, "ORG"), origin: PreAnnotationOrigin::Rule("r".into()) },
        PreAnnotationRow { example_id: "ex01".into(), payload: span(0, 9, "NOPE"), origin: PreAnnotationOrigin::Rule("r".into()) },
    ];
    match p.upload_preannotations(&f.job.id, &rows) {
        Err(Error::MalformedRows(diags)) => {
            let fields: Vec<&str> = diags.iter().map(|d| d.field.as_str()).collect();
            assert_eq!(fields, ["rows[1].example_id", "rows[2].payload"]);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(p.fingerprint().unwrap(), before);
}

#[test]
fn import_is_all_or_nothing() {
    let (p, f) = annotated();
    p.batch_accept_threshold(&f.job.id, 1.0, "rev").unwrap();
    let exported = p.export_job(&f.job.id, ExportFilter::All).unwrap();
    p.wipe_job_annotations(&f.job.id).unwrap();
    check(&p, FaultPoint::ImportMidway, || p.import_job(&f.job.id, &exported));
    assert_eq!(p.export_job(&f.job.id, ExportFilter::All).unwrap(), exported);
    assert!(p.integrity_violations().unwrap().is_empty());
}
