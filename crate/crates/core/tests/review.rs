mod common;

use std::collections::{BTreeMap, HashMap};

use common::*;
use proptest::prelude::*;
use tagmill_core::model::{
    payloads_conflict, AnnotatorKind, ClassificationMode, IdealPayload, JudgmentCause, Schema, Scope, Verdict,
};
use tagmill_core::scheduler::JobSpec;
use tagmill_core::{Error, Platform};

fn ideal_of(p: &Platform, job: &str, example: &str, payload: &IdealPayload) -> String {
    p.consolidate(job, example, Scope::All)
        .unwrap()
        .groups
        .into_iter()
        .find(|g| &g.ideal.payload == payload)
        .map(|g| g.ideal.id)
        .expect("ideal present")
}

fn sp(start: usize, end: usize, tag: &str) -> IdealPayload {
    IdealPayload::Span { start, end, tag: tag.into() }
}

#[test]
fn accepting_a_span_rejects_overlapping_spans() {
    let p = platform();
    let f = fixture(&p, &["White House officials met."], Schema::with_tags("s", &["PLACE", "ORG"]), 2, 2);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 11, "PLACE")]);
    work_through(&p, &f.job.id, &f.members[1], |_| vec![span(0, 5, "ORG"), span(12, 21, "ORG")]);
    let place = ideal_of(&p, &f.job.id, "ex00", &sp(0, 11, "PLACE"));
    let white = ideal_of(&p, &f.job.id, "ex00", &sp(0, 5, "ORG"));
    let out = p.accept_ideal(&f.job.id, &place, "rev").unwrap();
    assert_eq!(out.judgment.verdict, Verdict::Accepted);
    assert_eq!(out.transitive_rejections.len(), 1);
    let t = &out.transitive_rejections[0];
    assert_eq!((t.ideal_id.as_str(), t.cause, t.caused_by.as_deref()), (white.as_str(), JudgmentCause::Transitive, Some(place.as_str())));

    // The non-overlapping span is untouched; accepting it has no side effects.
    let officials = ideal_of(&p, &f.job.id, "ex00", &sp(12, 21, "ORG"));
    assert!(!p.judgments(&f.job.id).unwrap().contains_key(&officials));
    assert!(p.accept_ideal(&f.job.id, &officials, "rev").unwrap().transitive_rejections.is_empty());

    // The rejected one cannot be accepted while the winner stands.
    match p.accept_ideal(&f.job.id, &white, "rev") {
        Err(Error::ConflictsWithAccepted(b)) => assert_eq!(b[0].accepted_ideal_id, place),
        other => panic!("{other:?}"),
    }
}

fn class_job(mode: ClassificationMode) -> (Platform, Fixture, String, String) {
    let p = platform();
    let f = fixture(&p, &["some text"], Schema::with_classes("s", &["Y", "W"], mode), 2, 2);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![class("Y")]);
    work_through(&p, &f.job.id, &f.members[1], |_| vec![class("W")]);
    let y = ideal_of(&p, &f.job.id, "ex00", &IdealPayload::Class { class: "Y".into() });
    let w = ideal_of(&p, &f.job.id, "ex00", &IdealPayload::Class { class: "W".into() });
    (p, f, y, w)
}

#[test]
fn class_conflicts_depend_on_mode() {
    let (p, f, y, w) = class_job(ClassificationMode::SingleLabel);
    let out = p.accept_ideal(&f.job.id, &y, "rev").unwrap();
    assert_eq!(out.transitive_rejections.iter().map(|j| &j.ideal_id).collect::<Vec<_>>(), [&w]);

    let (p, f, y, w) = class_job(ClassificationMode::MultiLabel);
    assert!(p.accept_ideal(&f.job.id, &y, "rev").unwrap().transitive_rejections.is_empty());
    assert!(!p.judgments(&f.job.id).unwrap().contains_key(&w));
}

#[test]
fn consolidate_counts_support_and_seen() {
    let p = platform();
    let f = fixture(&p, &["Paris is lovely.", "untouched"], Schema::with_tags("s", &["PLACE", "ORG"]), 3, 3);
    work_through(&p, &f.job.id, &f.members[0], |t| if t.example_id == "ex00" { vec![span(0, 5, "PLACE")] } else { vec![] });
    work_through(&p, &f.job.id, &f.members[1], |t| if t.example_id == "ex00" { vec![span(0, 5, "PLACE")] } else { vec![] });
    work_through(&p, &f.job.id, &f.members[2], |t| if t.example_id == "ex00" { vec![span(0, 8, "ORG")] } else { vec![] });
    let view = p.consolidate(&f.job.id, "ex00", Scope::All).unwrap();
    assert_eq!(view.seen_count, 3);
    let counts: BTreeMap<String, usize> = view.groups.iter().map(|g| (g.surface.clone().unwrap(), g.event_count)).collect();
    assert_eq!(counts, BTreeMap::from([("Paris".to_string(), 2), ("Paris is".to_string(), 1)]));
    assert_eq!(view.conflicts.len(), 1);
    for g in &view.groups {
        assert!(g.supporting_annotators.iter().all(|a| view.seen_by.contains(a)));
    }

    let empty = p.consolidate(&f.job.id, "ex01", Scope::All).unwrap();
    assert!(empty.groups.is_empty());
    assert_eq!(empty.seen_count, 3);

    let models = p.consolidate(&f.job.id, "ex00", Scope::Models).unwrap();
    assert!(models.groups.is_empty());
    assert_eq!(models.seen_count, 0);

    assert!(matches!(p.consolidate(&f.job.id, "nope", Scope::All), Err(Error::ExampleNotInJob { .. })));
}

#[test]
fn unsubmitted_example_has_nothing_to_consolidate() {
    let p = platform();
    let f = fixture(&p, &["alpha"], Schema::with_tags("s", &["T"]), 1, 1);
    let view = p.consolidate(&f.job.id, "ex00", Scope::All).unwrap();
    assert!(view.groups.is_empty());
    assert_eq!(view.seen_count, 0);
}

#[test]
fn reject_is_idempotent_and_keeps_the_ideal_listed() {
    let p = platform();
    let f = fixture(&p, &["alpha beta"], Schema::with_tags("s", &["T"]), 1, 1);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 5, "T")]);
    let id = ideal_of(&p, &f.job.id, "ex00", &sp(0, 5, "T"));
    let first = p.reject_ideal(&f.job.id, &id, "rev").unwrap();
    let before = p.fingerprint().unwrap();
    let second = p.reject_ideal(&f.job.id, &id, "rev").unwrap();
    assert_eq!(first, second);
    assert_eq!(p.fingerprint().unwrap(), before);
    let view = p.consolidate(&f.job.id, "ex00", Scope::All).unwrap();
    assert_eq!(view.groups[0].judgment.as_ref().unwrap().verdict, Verdict::Rejected);
}

#[test]
fn unknown_or_foreign_ideals_are_refused() {
    let p = platform();
    let f = fixture(&p, &["alpha beta"], Schema::with_tags("s", &["T"]), 1, 1);
    let orphan = p.intern_ideal(&f.dataset, "ex00", &f.schema, &span(0, 5, "T")).unwrap();
    assert!(matches!(p.accept_ideal(&f.job.id, &orphan, "rev"), Err(Error::UnknownIdeal(_))));
    assert!(matches!(p.reject_ideal(&f.job.id, "missing", "rev"), Err(Error::UnknownIdeal(_))));
}

#[test]
fn flipping_an_accept_revokes_and_recomputes() {
    let p = platform();
    let f = fixture(&p, &["abcdefghij"], Schema::with_tags("s", &["T"]), 1, 1);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 4, "T"), span(3, 7, "T"), span(6, 10, "T")]);
    let a = ideal_of(&p, &f.job.id, "ex00", &sp(0, 4, "T"));
    let b = ideal_of(&p, &f.job.id, "ex00", &sp(3, 7, "T"));
    let c = ideal_of(&p, &f.job.id, "ex00", &sp(6, 10, "T"));
    p.accept_ideal(&f.job.id, &a, "rev").unwrap(); // rejects b
    p.accept_ideal(&f.job.id, &c, "rev").unwrap(); // b already rejected
    let j = p.judgments(&f.job.id).unwrap();
    assert_eq!(j[&b].caused_by.as_deref(), Some(a.as_str()));

    p.reject_ideal(&f.job.id, &a, "rev").unwrap();
    let j = p.judgments(&f.job.id).unwrap();
    assert_eq!(j[&a].verdict, Verdict::Rejected);
    assert_eq!(j[&b].cause, JudgmentCause::Transitive);
    assert_eq!(j[&b].caused_by.as_deref(), Some(c.as_str()), "re-derived from the other winner");

    p.reject_ideal(&f.job.id, &c, "rev").unwrap();
    assert!(!p.judgments(&f.job.id).unwrap().contains_key(&b), "nothing left to reject b");
    assert!(p.integrity_violations().unwrap().is_empty());
}

fn voting_fixture(n: usize) -> (Platform, Fixture) {
    let p = platform();
    let f = fixture(&p, &["abcdefghijklmnop"], Schema::with_tags("s", &["T"]), n, n);
    (p, f)
}

#[test]
fn threshold_compares_support_ratio() {
    for (threshold, expected) in [(0.66, 1), (0.7, 0)] {
        let (p, f) = voting_fixture(3);
        work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 3, "T")]);
        work_through(&p, &f.job.id, &f.members[1], |_| vec![span(0, 3, "T")]);
        work_through(&p, &f.job.id, &f.members[2], |_| vec![]);
        assert_eq!(p.batch_accept_threshold(&f.job.id, threshold, "rev").unwrap(), expected, "t={threshold}");
    }
    let (p, f) = voting_fixture(3);
    for a in f.members.clone() {
        work_through(&p, &f.job.id, &a, |_| vec![span(0, 3, "T")]);
    }
    assert_eq!(p.batch_accept_threshold(&f.job.id, 1.0, "rev").unwrap(), 1);
    let before = p.fingerprint().unwrap();
    assert_eq!(p.batch_accept_threshold(&f.job.id, 1.0, "rev").unwrap(), 0);
    assert_eq!(p.fingerprint().unwrap(), before, "second run changes nothing");
}

#[test]
fn threshold_ties_go_to_the_earlier_first_event() {
    for first_is_x in [true, false] {
        let (p, f) = voting_fixture(4);
        let x = vec![span(0, 5, "T")];
        let y = vec![span(3, 9, "T")];
        let order = if first_is_x { [&x, &x, &y, &y] } else { [&y, &y, &x, &x] };
        for (a, payloads) in f.members.iter().zip(order) {
            work_through(&p, &f.job.id, a, |_| payloads.clone());
        }
        assert_eq!(p.batch_accept_threshold(&f.job.id, 0.5, "rev").unwrap(), 1);
        let j = p.judgments(&f.job.id).unwrap();
        let xid = ideal_of(&p, &f.job.id, "ex00", &sp(0, 5, "T"));
        let yid = ideal_of(&p, &f.job.id, "ex00", &sp(3, 9, "T"));
        let (winner, loser) = if first_is_x { (xid, yid) } else { (yid, xid) };
        assert_eq!(j[&winner].cause, JudgmentCause::ThresholdBatch);
        assert_eq!(j[&loser].caused_by.as_deref(), Some(winner.as_str()));
    }
}

#[test]
fn threshold_must_be_a_fraction() {
    let (p, f) = voting_fixture(1);
    for t in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(matches!(p.batch_accept_threshold(&f.job.id, t, "rev"), Err(Error::InvalidThreshold(_))));
    }
}

#[test]
fn denominators_only_count_annotators_who_saw_the_example() {
    // Three team members, redundancy two: each example is seen by two.
    let p = platform();
    let f = fixture(&p, &["aaaa bbbb", "cccc dddd", "eeee ffff"], Schema::with_tags("s", &["T"]), 3, 2);
    for a in f.members.clone() {
        work_through(&p, &f.job.id, &a, |_| vec![span(0, 4, "T")]);
    }
    // Each ideal has 2 supporters out of 2 viewers, so unanimity holds.
    assert_eq!(p.batch_accept_threshold(&f.job.id, 1.0, "rev").unwrap(), 3);
}

#[test]
fn lexical_groups_key_on_surface_and_tag() {
    let p = platform();
    let docs = ["Paris and Paris", "Paris again", "London calling"];
    let f = fixture(&p, &docs, Schema::with_tags("s", &["PLACE", "ORG"]), 2, 2);
    for a in f.members.clone() {
        work_through(&p, &f.job.id, &a, |t| match t.example_id.as_str() {
            "ex00" => vec![span(0, 5, "PLACE"), span(10, 15, "PLACE")],
            "ex01" => vec![span(0, 5, "ORG")],
            _ => vec![span(0, 6, "PLACE")],
        });
    }
    let groups = p.lexical_groups(&f.job.id, Scope::All).unwrap();
    let keys: Vec<(&str, &str, usize, usize)> =
        groups.iter().map(|g| (g.surface.as_str(), g.tag.as_str(), g.ideal_ids.len(), g.event_count)).collect();
    assert_eq!(keys, [("Paris", "PLACE", 2, 4), ("London", "PLACE", 1, 2), ("Paris", "ORG", 1, 2)]);

    let rejected = p.batch_review_lexical(&f.job.id, "Paris", "ORG", Scope::All, Verdict::Rejected, "rev").unwrap();
    assert_eq!(rejected.len(), 1);
    let accepted = p.batch_review_lexical(&f.job.id, "Paris", "PLACE", Scope::All, Verdict::Accepted, "rev").unwrap();
    assert_eq!(accepted.len(), 2);
    assert!(accepted.iter().all(|j| j.cause == JudgmentCause::LexicalBatch));
}

#[test]
fn lexical_batch_aborts_on_conflict_with_earlier_accept() {
    let p = platform();
    let f = fixture(&p, &["Acme Corp news", "Acme Corp more"], Schema::with_tags("s", &["ORG", "BRAND"]), 1, 1);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 4, "BRAND"), span(0, 9, "ORG")]);
    let brand = ideal_of(&p, &f.job.id, "ex01", &sp(0, 4, "BRAND"));
    p.accept_ideal(&f.job.id, &brand, "rev").unwrap();
    let before = p.fingerprint().unwrap();
    // The ex01 "Acme Corp" ideal is already transitively rejected; accepting
    // the group must fail and report it.
    match p.batch_review_lexical(&f.job.id, "Acme Corp", "ORG", Scope::All, Verdict::Accepted, "rev") {
        Err(Error::ConflictsWithAccepted(b)) => {
            assert_eq!(b.len(), 1);
            assert_eq!(b[0].accepted_ideal_id, brand);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(p.fingerprint().unwrap(), before);
}

#[test]
fn late_submissions_respect_existing_accepts() {
    let p = platform();
    let f = fixture(&p, &["abcdefgh"], Schema::with_tags("s", &["T"]), 2, 2);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 4, "T")]);
    let a = ideal_of(&p, &f.job.id, "ex00", &sp(0, 4, "T"));
    p.accept_ideal(&f.job.id, &a, "rev").unwrap();
    work_through(&p, &f.job.id, &f.members[1], |_| vec![span(2, 6, "T")]);
    let b = ideal_of(&p, &f.job.id, "ex00", &sp(2, 6, "T"));
    let j = p.judgments(&f.job.id).unwrap();
    assert_eq!(j[&b].caused_by.as_deref(), Some(a.as_str()));
}

// Model-based checking of arbitrary verdict sequences.

#[derive(Debug, Clone, PartialEq)]
struct Expected {
    verdict: Verdict,
    transitive: bool,
    caused_by: Option<String>,
}

/// Judgment state recomputed from the manual-verdict log alone.
fn recompute(ideals: &[(String, IdealPayload, String)], log: &[(bool, String)]) -> HashMap<String, Expected> {
    let conflict = |a: &(String, IdealPayload, String), b: &(String, IdealPayload, String)| {
        a.0 != b.0 && a.2 == b.2 && payloads_conflict(&a.1, &b.1, ClassificationMode::SingleLabel)
    };
    let by_id: HashMap<&str, &(String, IdealPayload, String)> = ideals.iter().map(|i| (i.0.as_str(), i)).collect();
    let mut primary: HashMap<String, (Verdict, usize)> = HashMap::new();
    for (step, (accept, id)) in log.iter().enumerate() {
        let me = by_id[id.as_str()];
        if *accept {
            if primary.get(id).is_some_and(|(v, _)| *v == Verdict::Accepted) {
                continue;
            }
            let blocked = ideals
                .iter()
                .any(|o| conflict(me, o) && primary.get(&o.0).is_some_and(|(v, _)| *v == Verdict::Accepted));
            if !blocked {
                primary.insert(id.clone(), (Verdict::Accepted, step));
            }
        } else if !primary.get(id).is_some_and(|(v, _)| *v == Verdict::Rejected) {
            primary.insert(id.clone(), (Verdict::Rejected, step));
        }
    }
    let mut out = HashMap::new();
    for me in ideals {
        if let Some((v, _)) = primary.get(&me.0) {
            out.insert(me.0.clone(), Expected { verdict: *v, transitive: false, caused_by: None });
            continue;
        }
        let cause = ideals
            .iter()
            .filter(|o| conflict(me, o))
            .filter_map(|o| match primary.get(&o.0) {
                Some((Verdict::Accepted, step)) => Some((*step, o.0.clone())),
                _ => None,
            })
            .min();
        if let Some((_, by)) = cause {
            out.insert(me.0.clone(), Expected { verdict: Verdict::Rejected, transitive: true, caused_by: Some(by) });
        }
    }
    out
}

fn observed(p: &Platform, job: &str) -> HashMap<String, Expected> {
    p.judgments(job)
        .unwrap()
        .into_values()
        .map(|j| {
            let e = Expected { verdict: j.verdict, transitive: j.cause == JudgmentCause::Transitive, caused_by: j.caused_by };
            (j.ideal_id, e)
        })
        .collect()
}

const TEXT: &str = "abcdefghijklmnopqrstuvwxyz0123";

/// Per annotator, per example: `(start, end, tag is U)` spans.
type Submissions = [Vec<Vec<(usize, usize, bool)>>];

fn build(submissions: &Submissions) -> (Platform, String) {
    let p = platform();
    let f = fixture(&p, &[TEXT, TEXT], Schema::with_tags("s", &["T", "U"]), 3, 3);
    for (a, per_example) in f.members.iter().zip(submissions) {
        work_through(&p, &f.job.id, a, |t| {
            let k = if t.example_id == "ex00" { 0 } else { 1 };
            per_example[k].iter().map(|&(s, e, u)| span(s, e, if u { "U" } else { "T" })).collect()
        });
    }
    (p, f.job.id)
}

fn arb_spans() -> impl Strategy<Value = Vec<(usize, usize, bool)>> {
    prop::collection::vec((0usize..28, 1usize..6, any::<bool>()).prop_map(|(s, l, u)| (s, (s + l).min(30), u)), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdict_sequences_match_the_recomputed_model(
        submissions in prop::collection::vec(prop::collection::vec(arb_spans(), 2), 3),
        ops in prop::collection::vec((any::<bool>(), any::<prop::sample::Index>()), 1..30),
    ) {
        let (p, job) = build(&submissions);
        let mut ideals: Vec<(String, IdealPayload, String)> = Vec::new();
        for ex in ["ex00", "ex01"] {
            for g in p.consolidate(&job, ex, Scope::All).unwrap().groups {
                ideals.push((g.ideal.id, g.ideal.payload, ex.to_string()));
            }
        }
        prop_assume!(!ideals.is_empty());
        let mut log = Vec::new();
        for (accept, pick) in ops {
            let id = ideals[pick.index(ideals.len())].0.clone();
            let result = if accept {
                p.accept_ideal(&job, &id, "rev").map(|_| ())
            } else {
                p.reject_ideal(&job, &id, "rev").map(|_| ())
            };
            match result {
                Ok(()) => {}
                Err(Error::ConflictsWithAccepted(_)) => {}
                Err(e) => panic!("{e:?}"),
            }
            log.push((accept, id));
            prop_assert_eq!(observed(&p, &job), recompute(&ideals, &log));

            // Safety: accepted ideals never conflict.
            let judgments = p.judgments(&job).unwrap();
            let accepted: Vec<_> = ideals.iter().filter(|i| judgments.get(&i.0).is_some_and(|j| j.verdict == Verdict::Accepted)).collect();
            for (k, a) in accepted.iter().enumerate() {
                for b in &accepted[k + 1..] {
                    prop_assert!(!(a.2 == b.2 && payloads_conflict(&a.1, &b.1, ClassificationMode::SingleLabel)));
                }
            }
        }
        prop_assert!(p.integrity_violations().unwrap().is_empty());

        // Replaying the log on a fresh store reproduces every row.
        let (q, job2) = build(&submissions);
        prop_assert_eq!(&job, &job2);
        for (accept, id) in &log {
            let _ = if *accept { q.accept_ideal(&job2, id, "rev").map(|_| ()) } else { q.reject_ideal(&job2, id, "rev").map(|_| ()) };
        }
        prop_assert_eq!(p.fingerprint().unwrap(), q.fingerprint().unwrap());
    }
}

#[test]
fn transitive_rejections_match_a_full_scan() {
    let p = platform();
    let f = fixture(&p, &[TEXT], Schema::with_tags("s", &["T", "U"]), 2, 2);
    work_through(&p, &f.job.id, &f.members[0], |_| vec![span(0, 10, "T"), span(20, 25, "U")]);
    work_through(&p, &f.job.id, &f.members[1], |_| vec![span(5, 8, "U"), span(9, 21, "T"), span(26, 30, "T")]);
    let view = p.consolidate(&f.job.id, "ex00", Scope::All).unwrap();
    let target = ideal_of(&p, &f.job.id, "ex00", &sp(9, 21, "T"));
    let me = view.groups.iter().find(|g| g.ideal.id == target).unwrap();
    let mut scan: Vec<String> = view
        .groups
        .iter()
        .filter(|g| g.ideal.id != target && payloads_conflict(&g.ideal.payload, &me.ideal.payload, ClassificationMode::SingleLabel))
        .map(|g| g.ideal.id.clone())
        .collect();
    scan.sort();
    let mut got: Vec<String> =
        p.accept_ideal(&f.job.id, &target, "rev").unwrap().transitive_rejections.into_iter().map(|j| j.ideal_id).collect();
    got.sort();
    assert_eq!(got, scan);
    assert_eq!(got.len(), 2);
}

#[test]
fn models_and_humans_are_scoped_apart() {
    let p = platform();
    let dataset = p.create_dataset("d", &examples(&["Acme Corp"]), None).unwrap();
    let schema = p.create_schema(Schema::with_tags("s", &["ORG"])).unwrap();
    let humans = annotators(&p, "h", 1, AnnotatorKind::Human);
    let models = annotators(&p, "m", 1, AnnotatorKind::Model);
    let team = p.create_team("t", &[humans[0].clone(), models[0].clone()]).unwrap();
    let (job, _) = p
        .create_job(&JobSpec { dataset_id: dataset.id, schema_id: schema.id, team_id: team.id, redundancy: 2, seed: 1 })
        .unwrap();
    work_through(&p, &job.id, &humans[0], |_| vec![span(0, 4, "ORG")]);
    work_through(&p, &job.id, &models[0], |_| vec![span(0, 9, "ORG")]);
    let h = p.consolidate(&job.id, "ex00", Scope::Humans).unwrap();
    let m = p.consolidate(&job.id, "ex00", Scope::Models).unwrap();
    assert_eq!((h.groups.len(), h.seen_count), (1, 1));
    assert_eq!((m.groups.len(), m.seen_count), (1, 1));
    assert_eq!(m.groups[0].surface.as_deref(), Some("Acme Corp"));
}
