mod common;

use std::collections::HashSet;
use std::sync::Arc;
use std::thread;

use common::*;
use tagmill_core::model::{IdealPayload, Schema};
use tagmill_core::Error;

#[test]
fn concurrent_interning_yields_one_ideal() {
    let p = Arc::new(platform());
    let f = fixture(&p, &["The White House said so."], Schema::with_tags("s", &["ORG"]), 2, 1);
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let p = p.clone();
            let (d, s) = (f.dataset.clone(), f.schema.clone());
            // Some callers include the surrounding whitespace; all normalize alike.
            let payload = if i % 2 == 0 { span(4, 15, "ORG") } else { span(3, 15, "ORG") };
            thread::spawn(move || p.intern_ideal(&d, "ex00", &s, &payload).unwrap())
        })
        .collect();
    let ids: HashSet<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(ids.len(), 1);
    let rows = p.fingerprint().unwrap().iter().filter(|r| r.starts_with("ideals:")).count();
    assert_eq!(rows, 1);
    let ideal = p.ideal(ids.iter().next().unwrap()).unwrap();
    assert_eq!(ideal.payload, IdealPayload::Span { start: 4, end: 15, tag: "ORG".into() });
}

#[test]
fn different_tags_are_different_ideals() {
    let p = platform();
    let f = fixture(&p, &["Acme Corp ships."], Schema::with_tags("s", &["ORG", "BRAND"]), 1, 1);
    let a = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(0, 9, "ORG")).unwrap();
    let b = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(0, 9, "BRAND")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_payloads_are_refused() {
    let p = platform();
    let f = fixture(&p, &["abc   def"], Schema::with_tags("s", &["T"]), 1, 1);
    let whitespace_only = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(3, 6, "T"));
    assert!(matches!(whitespace_only, Err(Error::InvalidPayload(_))), "{whitespace_only:?}");
    let out_of_range = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(0, 99, "T"));
    assert!(matches!(out_of_range, Err(Error::InvalidPayload(_))), "{out_of_range:?}");
    let bad_tag = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(0, 3, "NOPE"));
    assert!(matches!(bad_tag, Err(Error::InvalidPayload(_))), "{bad_tag:?}");
    assert!(p.fingerprint().unwrap().iter().all(|r| !r.starts_with("ideals:")));
}

#[test]
fn offsets_count_code_points() {
    let p = platform();
    let f = fixture(&p, &["Ünïcödé façade here"], Schema::with_tags("s", &["T"]), 1, 1);
    let id = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(8, 14, "T")).unwrap();
    assert_eq!(p.ideal(&id).unwrap().payload, IdealPayload::Span { start: 8, end: 14, tag: "T".into() });
}
