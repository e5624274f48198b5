//! Trigram-indexed regular-expression search over a dataset.
//!
//! The index narrows the corpus to candidates; each candidate is then
//! verified with the real regex, so results are exactly those of a full
//! scan. The trigram stage is case-insensitive and the verification stage
//! applies the requested case semantics.

mod fold;
mod index;
mod plan;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fold::{fold_key, fold_keys};
pub use index::{IndexedDoc, Trigram, TrigramIndex};
pub use plan::{evaluate, plan_query, Candidates, TrigramQuery};

pub const DEFAULT_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub pattern: String,
    #[serde(default)]
    pub case_insensitive: bool,
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default)]
    pub offset: usize,
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

impl SearchQuery {
    pub fn new(pattern: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), case_insensitive: false, limit: DEFAULT_LIMIT, offset: 0 }
    }

    pub fn case_insensitive(mut self, yes: bool) -> Self {
        self.case_insensitive = yes;
        self
    }

    pub fn unlimited(mut self) -> Self {
        self.limit = usize::MAX;
        self
    }
}

/// A match as code-point offsets `[start, end)` into the example content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub example_id: String,
    pub spans: Vec<MatchSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResults {
    pub hits: Vec<SearchHit>,
    /// Offset of the next page, when more matches exist.
    pub next_offset: Option<usize>,
    /// Size of the trigram candidate set.
    pub candidates: usize,
    /// Candidates actually verified with the regex before the page filled.
    pub examined: usize,
    pub doc_count: usize,
}

pub fn compile(pattern: &str, case_insensitive: bool) -> Result<Regex> {
    RegexBuilder::new(pattern)
        .case_insensitive(case_insensitive)
        .build()
        .map_err(|e| Error::InvalidRegex(e.to_string()))
}

/// Non-overlapping matches of `regex` in `text`, as code-point spans.
pub fn match_spans(regex: &Regex, text: &str) -> Vec<MatchSpan> {
    let mut spans = Vec::new();
    let mut byte_pos = 0;
    let mut char_pos = 0;
    let advance = |to: usize, byte_pos: &mut usize, char_pos: &mut usize| {
        *char_pos += text[*byte_pos..to].chars().count();
        *byte_pos = to;
    };
    for m in regex.find_iter(text) {
        advance(m.start(), &mut byte_pos, &mut char_pos);
        let start = char_pos;
        advance(m.end(), &mut byte_pos, &mut char_pos);
        spans.push(MatchSpan { start, end: char_pos });
    }
    spans
}

pub fn search(index: &TrigramIndex, query: &SearchQuery) -> Result<SearchResults> {
    let regex = compile(&query.pattern, query.case_insensitive)?;
    let plan = plan_query(&query.pattern, query.case_insensitive)?;
    let candidates = evaluate(&plan, index);
    let mut hits = Vec::new();
    let mut matched = 0usize;
    let mut examined = 0usize;
    let mut next_offset = None;
    for ordinal in candidates.ordinals(index) {
        let doc = index.doc(ordinal);
        examined += 1;
        if !regex.is_match(&doc.content) {
            continue;
        }
        if matched >= query.offset {
            if hits.len() == query.limit {
                next_offset = Some(query.offset + query.limit);
                break;
            }
            hits.push(SearchHit { example_id: doc.id.clone(), spans: match_spans(&regex, &doc.content) });
        }
        matched += 1;
    }
    Ok(SearchResults {
        hits,
        next_offset,
        candidates: candidates.len(index),
        examined,
        doc_count: index.doc_count(),
    })
}
