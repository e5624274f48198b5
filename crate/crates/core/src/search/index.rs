use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::fold::fold_keys;
use crate::error::{Error, Result};
use crate::model::Example;

/// Three consecutive case-folded code points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trigram(pub [char; 3]);

impl Trigram {
    pub fn new(s: &str) -> Option<Self> {
        let keys = fold_keys(s);
        match keys.as_slice() {
            [a, b, c] => Some(Trigram([*a, *b, *c])),
            _ => None,
        }
    }
}

impl fmt::Display for Trigram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a}{b}{c}")
    }
}

impl Serialize for Trigram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Distinct trigrams of `keys` in first-occurrence order.
pub(crate) fn trigrams_of(keys: &[char]) -> Vec<Trigram> {
    let mut seen = HashSet::new();
    keys.windows(3)
        .map(|w| Trigram([w[0], w[1], w[2]]))
        .filter(|t| seen.insert(*t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedDoc {
    pub id: String,
    pub content: Arc<str>,
}

/// Posting lists from trigram to the ordinals of documents containing it.
/// Ordinals follow insertion order, so every list is strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrigramIndex {
    dataset_id: String,
    docs: Vec<IndexedDoc>,
    ordinals: HashMap<String, u32>,
    postings: HashMap<Trigram, Vec<u32>>,
}

impl TrigramIndex {
    pub fn new(dataset_id: impl Into<String>) -> Self {
        Self { dataset_id: dataset_id.into(), ..Self::default() }
    }

    pub fn build<'a>(dataset_id: impl Into<String>, examples: impl IntoIterator<Item = &'a Example>) -> Result<Self> {
        let mut index = Self::new(dataset_id);
        for example in examples {
            index.add_example(example)?;
        }
        Ok(index)
    }

    pub fn add_example(&mut self, example: &Example) -> Result<()> {
        if self.ordinals.contains_key(&example.id) {
            return Err(Error::DuplicateExample(example.id.clone()));
        }
        let ordinal = self.docs.len() as u32;
        for trigram in trigrams_of(&fold_keys(&example.content)) {
            self.postings.entry(trigram).or_default().push(ordinal);
        }
        self.ordinals.insert(example.id.clone(), ordinal);
        self.docs.push(IndexedDoc { id: example.id.clone(), content: Arc::from(example.content.as_str()) });
        Ok(())
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn docs(&self) -> &[IndexedDoc] {
        &self.docs
    }

    pub fn doc(&self, ordinal: u32) -> &IndexedDoc {
        &self.docs[ordinal as usize]
    }

    pub fn contains(&self, example_id: &str) -> bool {
        self.ordinals.contains_key(example_id)
    }

    pub fn postings(&self, trigram: &Trigram) -> &[u32] {
        self.postings.get(trigram).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn trigram_count(&self) -> usize {
        self.postings.len()
    }

    pub fn iter_postings(&self) -> impl Iterator<Item = (&Trigram, &[u32])> {
        self.postings.iter().map(|(t, p)| (t, p.as_slice()))
    }
}
