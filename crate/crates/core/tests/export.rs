mod common;

use common::*;
use serde_json::Value;
use tagmill_core::export::ExportFilter;
use tagmill_core::model::{Schema, Scope};
use tagmill_core::Error;

fn reviewed() -> (tagmill_core::Platform, Fixture) {
    let p = platform();
    let f = fixture(&p, &["White House staff", "Paris in spring", "nothing to see here"], Schema::with_tags("s", &["PLACE", "ORG"]), 3, 2);
    let m = f.members.clone();
    work_through(&p, &f.job.id, &m[0], |_| vec![span(0, 5, "PLACE")]);
    work_through(&p, &f.job.id, &m[1], |_| vec![span(0, 5, "PLACE"), span(0, 11, "ORG")]);
    work_through(&p, &f.job.id, &m[2], |_| vec![span(3, 8, "ORG")]);
    p.batch_accept_threshold(&f.job.id, 0.5, "rev").unwrap();
    (p, f)
}

#[test]
fn all_mode_has_one_line_per_event() {
    let (p, f) = reviewed();
    let text = p.export_job(&f.job.id, ExportFilter::All).unwrap();
    let events = p.fingerprint().unwrap().iter().filter(|r| r.starts_with("events:")).count();
    assert_eq!(text.lines().count(), events);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["format_version"], 1);
        assert!(v["judgments"].is_array());
    }
}

#[test]
fn accepted_mode_lists_gold_only() {
    let (p, f) = reviewed();
    let text = p.export_job(&f.job.id, ExportFilter::AcceptedOnly).unwrap();
    assert_eq!(text.lines().count(), p.accepted_ideals(&f.job.id).unwrap().len());
    assert!(text.lines().count() > 0);

    let q = platform();
    let g = fixture(&q, &["abc"], Schema::with_tags("s", &["T"]), 1, 1);
    assert_eq!(q.export_job(&g.job.id, ExportFilter::AcceptedOnly).unwrap(), "");
    assert!(matches!(q.export_job("missing", ExportFilter::All), Err(Error::UnknownJob(_))));
}

#[test]
fn export_wipe_import_roundtrip_is_byte_identical() {
    let (p, f) = reviewed();
    let before = p.export_job(&f.job.id, ExportFilter::All).unwrap();
    let fingerprint = p.fingerprint().unwrap();
    p.wipe_job_annotations(&f.job.id).unwrap();
    assert_eq!(p.export_job(&f.job.id, ExportFilter::All).unwrap(), "");
    let counts = p.import_job(&f.job.id, &before).unwrap();
    assert_eq!(counts.lines, before.lines().count());
    assert_eq!(p.export_job(&f.job.id, ExportFilter::All).unwrap(), before);
    // Everything except judgment sequence numbers is restored.
    let strip = |rows: Vec<String>| -> Vec<String> {
        rows.into_iter().filter(|r| !r.starts_with("judgments:") && !r.starts_with("sqlite_sequence")).collect()
    };
    assert_eq!(strip(p.fingerprint().unwrap()), strip(fingerprint));
    assert!(p.integrity_violations().unwrap().is_empty());
    // Review keeps working on the restored state.
    let view = p.consolidate(&f.job.id, "ex00", Scope::All).unwrap();
    assert!(view.groups.iter().all(|g| g.judgment.is_some()));
}

#[test]
fn malformed_import_is_refused_whole() {
    let (p, f) = reviewed();
    let text = p.export_job(&f.job.id, ExportFilter::All).unwrap();
    p.wipe_job_annotations(&f.job.id).unwrap();
    let before = p.fingerprint().unwrap();
    let broken = format!("{text}{{not json\n");
    match p.import_job(&f.job.id, &broken) {
        Err(Error::MalformedImport { line, .. }) => assert_eq!(line, text.lines().count() + 1),
        other => panic!("{other:?}"),
    }
    assert_eq!(p.fingerprint().unwrap(), before);
}
