//! Regex to trigram query planning.
//!
//! Runs of literal characters of length three or more become an AND of
//! their trigrams; alternation becomes an OR of its branch plans. Anything
//! else contributes nothing and, if nothing at all is extractable, the plan
//! is ANY. Every plan admits a superset of the documents the regex matches.

use std::fmt;

use regex_syntax::hir::{Class, Hir, HirKind};
use regex_syntax::ParserBuilder;
use serde::Serialize;

use super::fold::fold_key;
use super::index::{trigrams_of, Trigram, TrigramIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", content = "args", rename_all = "lowercase")]
pub enum TrigramQuery {
    Any,
    Trigram(Trigram),
    And(Vec<TrigramQuery>),
    Or(Vec<TrigramQuery>),
}

impl fmt::Display for TrigramQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, items: &[TrigramQuery]| {
            write!(f, "{name}(")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{item}")?;
            }
            f.write_str(")")
        };
        match self {
            TrigramQuery::Any => f.write_str("ANY"),
            TrigramQuery::Trigram(t) => write!(f, "{t:?}", t = t.to_string()),
            TrigramQuery::And(items) => list(f, "AND", items),
            TrigramQuery::Or(items) => list(f, "OR", items),
        }
    }
}

pub fn plan_query(pattern: &str, case_insensitive: bool) -> Result<TrigramQuery> {
    let hir = ParserBuilder::new()
        .case_insensitive(case_insensitive)
        .build()
        .parse(pattern)
        .map_err(|e| Error::InvalidRegex(e.to_string()))?;
    Ok(plan_hir(&hir))
}

fn plan_hir(hir: &Hir) -> TrigramQuery {
    match hir.kind() {
        HirKind::Capture(cap) => plan_hir(&cap.sub),
        HirKind::Alternation(branches) => {
            let mut plans = Vec::with_capacity(branches.len());
            for branch in branches {
                match plan_hir(branch) {
                    TrigramQuery::Any => return TrigramQuery::Any,
                    plan => plans.push(plan),
                }
            }
            TrigramQuery::Or(plans)
        }
        _ => {
            let mut pieces = Vec::new();
            collect_pieces(hir, &mut pieces);
            let mut trigrams = Vec::new();
            for run in pieces.split(|p| p.is_none()) {
                let keys: Vec<char> = run.iter().flatten().copied().collect();
                for t in trigrams_of(&keys) {
                    if !trigrams.contains(&t) {
                        trigrams.push(t);
                    }
                }
            }
            if trigrams.is_empty() {
                TrigramQuery::Any
            } else {
                TrigramQuery::And(trigrams.into_iter().map(TrigramQuery::Trigram).collect())
            }
        }
    }
}

/// Flattens `hir` into a sequence of literal keys, with `None` marking a
/// point where the literal run is broken.
fn collect_pieces(hir: &Hir, out: &mut Vec<Option<char>>) {
    match hir.kind() {
        HirKind::Empty | HirKind::Look(_) => {}
        HirKind::Literal(lit) => match std::str::from_utf8(&lit.0) {
            Ok(text) => out.extend(text.chars().map(|c| Some(fold_key(c)))),
            Err(_) => out.push(None),
        },
        HirKind::Class(class) => out.push(single_key(class)),
        HirKind::Concat(items) => items.iter().for_each(|h| collect_pieces(h, out)),
        HirKind::Capture(cap) => match cap.sub.kind() {
            HirKind::Alternation(_) | HirKind::Repetition(_) => out.push(None),
            _ => collect_pieces(&cap.sub, out),
        },
        HirKind::Repetition(_) | HirKind::Alternation(_) => out.push(None),
    }
}

/// A class whose members all share one trigram key (such as `[Kk]` produced
/// by case-insensitive matching) behaves like a literal.
fn single_key(class: &Class) -> Option<char> {
    const MAX_MEMBERS: u32 = 8;
    let Class::Unicode(class) = class else { return None };
    let mut key = None;
    let mut members = 0u32;
    for range in class.iter() {
        members += u32::from(range.end()) - u32::from(range.start()) + 1;
        if members > MAX_MEMBERS {
            return None;
        }
        for c in range.start()..=range.end() {
            let k = fold_key(c);
            match key {
                None => key = Some(k),
                Some(prev) if prev != k => return None,
                _ => {}
            }
        }
    }
    key
}

/// Documents admitted by a plan: every document, or a sorted ordinal list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidates {
    All,
    Some(Vec<u32>),
}

impl Candidates {
    pub fn len(&self, index: &TrigramIndex) -> usize {
        match self {
            Candidates::All => index.doc_count(),
            Candidates::Some(list) => list.len(),
        }
    }

    pub fn is_empty(&self, index: &TrigramIndex) -> bool {
        self.len(index) == 0
    }

    pub fn ordinals<'a>(&'a self, index: &TrigramIndex) -> Box<dyn Iterator<Item = u32> + 'a> {
        match self {
            Candidates::All => Box::new(0..index.doc_count() as u32),
            Candidates::Some(list) => Box::new(list.iter().copied()),
        }
    }
}

pub fn evaluate(query: &TrigramQuery, index: &TrigramIndex) -> Candidates {
    match query {
        TrigramQuery::Any => Candidates::All,
        TrigramQuery::Trigram(t) => Candidates::Some(index.postings(t).to_vec()),
        TrigramQuery::And(items) => {
            // Shortest lists first keeps intermediate results small.
            let mut parts: Vec<Candidates> = items.iter().map(|q| evaluate(q, index)).collect();
            parts.sort_by_key(|c| c.len(index));
            let mut acc = Candidates::All;
            for part in parts {
                acc = match (acc, part) {
                    (Candidates::All, other) | (other, Candidates::All) => other,
                    (Candidates::Some(a), Candidates::Some(b)) => Candidates::Some(intersect(&a, &b)),
                };
                if acc.is_empty(index) {
                    break;
                }
            }
            acc
        }
        TrigramQuery::Or(items) => {
            let mut acc = Vec::new();
            for item in items {
                match evaluate(item, index) {
                    Candidates::All => return Candidates::All,
                    Candidates::Some(list) => acc = union(&acc, &list),
                }
            }
            Candidates::Some(acc)
        }
    }
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j, mut out) = (0, 0, Vec::with_capacity(a.len() + b.len()));
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                *x
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                *x
            }
            (_, Some(y)) => {
                j += 1;
                *y
            }
            (Some(x), None) => {
                i += 1;
                *x
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}
