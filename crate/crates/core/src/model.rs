//! Persistent domain types and the pure rules shared by every other module:
//! span normalization, canonical ideal payloads and the conflict predicate.
//!
//! All offsets are Unicode code points into [`Example::content`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SpanError};

/// Metadata values are flat scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(serde_json::Number),
    Text(String),
}

impl Scalar {
    /// Total order used for contextual sorting: booleans, then numbers, then text.
    pub fn sort_cmp(&self, other: &Scalar) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        fn rank(s: &Scalar) -> u8 {
            match s {
                Scalar::Bool(_) => 0,
                Scalar::Number(_) => 1,
                Scalar::Text(_) => 2,
            }
        }
        match (self, other) {
            (Scalar::Bool(a), Scalar::Bool(b)) => a.cmp(b),
            (Scalar::Number(a), Scalar::Number(b)) => {
                let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
                a.partial_cmp(&b).unwrap_or(Ordering::Equal)
            }
            (Scalar::Text(a), Scalar::Text(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

pub type Metadata = BTreeMap<String, Scalar>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub group_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sort_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub name: String,
    pub example_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_config: Option<ContextConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub content: String,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationMode {
    #[default]
    SingleLabel,
    MultiLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTag {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub entity_tags: Vec<EntityTag>,
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default)]
    pub classification_mode: ClassificationMode,
    #[serde(default)]
    pub relation_types: Vec<String>,
    #[serde(default)]
    pub allows_nonterminals: bool,
}

impl Schema {
    /// A span-only schema with the given tags.
    pub fn with_tags(name: &str, tags: &[&str]) -> Self {
        Self {
            id: String::new(),
            name: name.into(),
            entity_tags: tags
                .iter()
                .map(|t| EntityTag { id: t.to_string(), name: t.to_string(), color: None })
                .collect(),
            classes: Vec::new(),
            classification_mode: ClassificationMode::SingleLabel,
            relation_types: Vec::new(),
            allows_nonterminals: false,
        }
    }

    /// A classification schema.
    pub fn with_classes(name: &str, classes: &[&str], mode: ClassificationMode) -> Self {
        Self {
            classes: classes.iter().map(|c| c.to_string()).collect(),
            classification_mode: mode,
            ..Self::with_tags(name, &[])
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::InvalidSchema("name must be non-empty".into()));
        }
        let mut seen = BTreeSet::new();
        for tag in &self.entity_tags {
            if tag.id.is_empty() || !seen.insert(tag.id.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate or empty tag id {:?}", tag.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for class in &self.classes {
            if class.is_empty() || !seen.insert(class.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate or empty class id {class:?}")));
            }
        }
        let mut seen = BTreeSet::new();
        for label in &self.relation_types {
            if label.is_empty() || !seen.insert(label.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate or empty relation type {label:?}")));
            }
        }
        Ok(())
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.entity_tags.iter().any(|t| t.id == tag)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.classes.iter().any(|c| c == class)
    }

    pub fn has_relation_type(&self, label: &str) -> bool {
        self.relation_types.iter().any(|r| r == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorKind {
    #[default]
    Human,
    Model,
}

impl AnnotatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotatorKind::Human => "human",
            AnnotatorKind::Model => "model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "human" => Some(AnnotatorKind::Human),
            "model" => Some(AnnotatorKind::Model),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub kind: AnnotatorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Team {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

/// Which annotations a review or metric looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Humans,
    Models,
    #[default]
    All,
}

impl Scope {
    pub fn includes(self, kind: AnnotatorKind) -> bool {
        match self {
            Scope::All => true,
            Scope::Humans => kind == AnnotatorKind::Human,
            Scope::Models => kind == AnnotatorKind::Model,
        }
    }
}

macro_rules! str_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Open,
    Complete,
    Archived,
}
str_enum!(JobState { Open => "open", Complete => "complete", Archived => "archived" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub dataset_id: String,
    pub schema_id: String,
    pub team_id: String,
    pub redundancy: usize,
    pub state: JobState,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Pending,
    Leased,
    Submitted,
}
str_enum!(TaskState { Pending => "pending", Leased => "leased", Submitted => "submitted" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub job_id: String,
    pub annotator_id: String,
    pub example_id: String,
    pub state: TaskState,
}

/// A node of a relation tree: a span ideal on the same example, or a
/// user-defined non-terminal container.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationNode {
    Ideal(String),
    Nonterminal { label: String, local_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub parent: RelationNode,
    pub child: RelationNode,
    pub label: String,
}

/// The content of an annotation, independent of who asserted it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IdealPayload {
    Span { start: usize, end: usize, tag: String },
    Class { class: String },
    Relation { edges: Vec<RelationEdge> },
}

impl IdealPayload {
    pub fn kind(&self) -> IdealKind {
        match self {
            IdealPayload::Span { .. } => IdealKind::Span,
            IdealPayload::Class { .. } => IdealKind::Class,
            IdealPayload::Relation { .. } => IdealKind::Relation,
        }
    }

    /// Canonical form: spans trimmed, relation edges deduplicated and sorted.
    pub fn canonicalize(&self, content: &str) -> Result<IdealPayload> {
        Ok(match self {
            IdealPayload::Span { start, end, tag } => {
                let (start, end) = normalize_span(content, *start, *end)?;
                IdealPayload::Span { start, end, tag: tag.clone() }
            }
            IdealPayload::Class { class } => IdealPayload::Class { class: class.clone() },
            IdealPayload::Relation { edges } => {
                let mut edges = edges.clone();
                edges.sort();
                edges.dedup();
                IdealPayload::Relation { edges }
            }
        })
    }

    /// The dedup key stored alongside each ideal.
    pub fn canonical_key(&self) -> String {
        serde_json::to_string(self).expect("payload serializes")
    }

    /// Checks tags, classes, relation labels and tree shape against the schema.
    /// Span bounds and relation node existence are checked by the store.
    pub fn validate_against(&self, schema: &Schema) -> Result<()> {
        match self {
            IdealPayload::Span { tag, .. } => {
                if !schema.has_tag(tag) {
                    return Err(Error::InvalidPayload(format!("unknown tag {tag:?}")));
                }
            }
            IdealPayload::Class { class } => {
                if !schema.has_class(class) {
                    return Err(Error::InvalidPayload(format!("unknown class {class:?}")));
                }
            }
            IdealPayload::Relation { edges } => {
                if edges.is_empty() {
                    return Err(Error::InvalidPayload("relation has no edges".into()));
                }
                for edge in edges {
                    if !schema.has_relation_type(&edge.label) {
                        return Err(Error::InvalidPayload(format!(
                            "unknown relation type {:?}",
                            edge.label
                        )));
                    }
                    for node in [&edge.parent, &edge.child] {
                        if matches!(node, RelationNode::Nonterminal { .. }) && !schema.allows_nonterminals {
                            return Err(Error::InvalidPayload(
                                "schema does not allow non-terminal nodes".into(),
                            ));
                        }
                    }
                }
                check_forest(edges)?;
            }
        }
        Ok(())
    }

    /// Sorted, distinct nodes of a relation payload.
    pub fn relation_nodes(&self) -> Option<BTreeSet<&RelationNode>> {
        match self {
            IdealPayload::Relation { edges } => {
                Some(edges.iter().flat_map(|e| [&e.parent, &e.child]).collect())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdealKind {
    Span,
    Class,
    Relation,
}
str_enum!(IdealKind { Span => "span", Class => "class", Relation => "relation" });

/// Each child has at most one parent and no node is its own ancestor.
pub fn check_forest(edges: &[RelationEdge]) -> Result<()> {
    let mut parent_of: HashMap<&RelationNode, &RelationNode> = HashMap::new();
    for edge in edges {
        if edge.parent == edge.child {
            return Err(Error::InvalidPayload("relation edge is a self-loop".into()));
        }
        if parent_of.insert(&edge.child, &edge.parent).is_some() {
            return Err(Error::InvalidPayload("relation node has more than one parent".into()));
        }
    }
    for start in parent_of.keys() {
        let mut cursor = *start;
        let mut steps = 0;
        while let Some(parent) = parent_of.get(cursor) {
            if parent == start || steps > parent_of.len() {
                return Err(Error::InvalidPayload("relation edges contain a cycle".into()));
            }
            cursor = parent;
            steps += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationIdeal {
    pub id: String,
    pub example_id: String,
    pub payload: IdealPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventSource {
    Annotator,
    PreAnnotationAccept,
}
str_enum!(EventSource { Annotator => "annotator", PreAnnotationAccept => "pre-annotation-accept" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub id: String,
    pub ideal_id: String,
    pub task_id: String,
    pub source: EventSource,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreAnnotationOrigin {
    Rule(String),
    Model(String),
}

impl PreAnnotationOrigin {
    pub(crate) fn parts(&self) -> (&'static str, &str) {
        match self {
            PreAnnotationOrigin::Rule(id) => ("rule", id),
            PreAnnotationOrigin::Model(id) => ("model", id),
        }
    }

    pub(crate) fn from_parts(kind: &str, id: String) -> Self {
        if kind == "rule" {
            PreAnnotationOrigin::Rule(id)
        } else {
            PreAnnotationOrigin::Model(id)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreAnnotationState {
    Pending,
    Accepted,
    Rejected,
}
str_enum!(PreAnnotationState { Pending => "pending", Accepted => "accepted", Rejected => "rejected" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreAnnotation {
    pub id: String,
    pub ideal_id: String,
    pub job_id: String,
    pub example_id: String,
    pub payload: IdealPayload,
    pub origin: PreAnnotationOrigin,
    pub state: PreAnnotationState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Rejected,
}
str_enum!(Verdict { Accepted => "accepted", Rejected => "rejected" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgmentCause {
    Manual,
    ThresholdBatch,
    Transitive,
    LexicalBatch,
}
str_enum!(JudgmentCause {
    Manual => "manual",
    ThresholdBatch => "threshold-batch",
    Transitive => "transitive",
    LexicalBatch => "lexical-batch",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewJudgment {
    pub id: String,
    pub job_id: String,
    pub ideal_id: String,
    pub reviewer_id: String,
    pub verdict: Verdict,
    pub cause: JudgmentCause,
    /// For transitive rejections, the accepted ideal that triggered them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caused_by: Option<String>,
    pub created_at: String,
    pub live: bool,
}

/// Number of code points in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// The substring between code-point offsets `start..end`. Offsets past the end clamp.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let mut indices = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len()));
    let from = indices.nth(start).unwrap_or(s.len());
    let to = if end > start { indices.nth(end - start - 1).unwrap_or(s.len()) } else { from };
    &s[from..to]
}

/// Trims leading and trailing whitespace from the selected range.
pub fn normalize_span(content: &str, start: usize, end: usize) -> Result<(usize, usize), SpanError> {
    let len = char_len(content);
    if start >= end || end > len {
        return Err(SpanError::OutOfBounds { start, end, len });
    }
    let selected: Vec<char> = content.chars().skip(start).take(end - start).collect();
    let lead = selected.iter().take_while(|c| c.is_whitespace()).count();
    if lead == selected.len() {
        return Err(SpanError::EmptyAfterTrim { start, end });
    }
    let trail = selected.iter().rev().take_while(|c| c.is_whitespace()).count();
    Ok((start + lead, end - trail))
}

/// Whether two distinct ideals on the same example cannot both be correct.
///
/// Any two spans sharing an offset conflict whatever their tags. Class
/// ideals conflict only in single-label mode. Relation ideals conflict when
/// they cover the same node set with different edges. Equal payloads are
/// the same ideal and never conflict.
pub fn payloads_conflict(a: &IdealPayload, b: &IdealPayload, mode: ClassificationMode) -> bool {
    if a == b {
        return false;
    }
    match (a, b) {
        (
            IdealPayload::Span { start: s1, end: e1, .. },
            IdealPayload::Span { start: s2, end: e2, .. },
        ) => s1 < e2 && s2 < e1,
        (IdealPayload::Class { class: c1 }, IdealPayload::Class { class: c2 }) => {
            mode == ClassificationMode::SingleLabel && c1 != c2
        }
        (IdealPayload::Relation { .. }, IdealPayload::Relation { .. }) => {
            a.relation_nodes() == b.relation_nodes()
        }
        _ => false,
    }
}

pub fn ideals_conflict(a: &AnnotationIdeal, b: &AnnotationIdeal, schema: &Schema) -> bool {
    a.id != b.id
        && a.example_id == b.example_id
        && payloads_conflict(&a.payload, &b.payload, schema.classification_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(start: usize, end: usize, tag: &str) -> IdealPayload {
        IdealPayload::Span { start, end, tag: tag.into() }
    }

    fn class(c: &str) -> IdealPayload {
        IdealPayload::Class { class: c.into() }
    }

    fn nt(label: &str, id: &str) -> RelationNode {
        RelationNode::Nonterminal { label: label.into(), local_id: id.into() }
    }

    fn edge(parent: RelationNode, child: RelationNode) -> RelationEdge {
        RelationEdge { parent, child, label: "part".into() }
    }

    #[test]
    fn normalize_trims_whitespace() {
        assert_eq!(normalize_span("  foo ", 0, 6), Ok((2, 5)));
        assert_eq!(normalize_span("abc", 0, 3), Ok((0, 3)));
        assert_eq!(
            normalize_span("a b", 1, 2),
            Err(SpanError::EmptyAfterTrim { start: 1, end: 2 })
        );
    }

    #[test]
    fn normalize_rejects_bad_offsets() {
        assert!(matches!(normalize_span("abc", 0, 4), Err(SpanError::OutOfBounds { .. })));
        assert!(matches!(normalize_span("abc", 2, 2), Err(SpanError::OutOfBounds { .. })));
        assert!(matches!(normalize_span("abc", 3, 1), Err(SpanError::OutOfBounds { .. })));
    }

    #[test]
    fn normalize_counts_code_points() {
        // "é" and the CJK characters are multi-byte in UTF-8.
        let text = "\u{3000}é日本 ";
        assert_eq!(normalize_span(text, 0, 5), Ok((1, 4)));
        assert_eq!(char_slice(text, 1, 4), "é日本");
    }

    #[test]
    fn char_slice_edges() {
        assert_eq!(char_slice("hello", 0, 5), "hello");
        assert_eq!(char_slice("hello", 5, 5), "");
        assert_eq!(char_slice("hello", 1, 3), "el");
        assert_eq!(char_slice("hello", 2, 99), "llo");
    }

    #[test]
    fn span_conflicts() {
        let mode = ClassificationMode::SingleLabel;
        assert!(payloads_conflict(&span(0, 11, "PLACE"), &span(0, 5, "ORG"), mode));
        assert!(!payloads_conflict(&span(0, 5, "ORG"), &span(6, 10, "ORG"), mode));
        assert!(!payloads_conflict(&span(0, 5, "ORG"), &span(5, 10, "ORG"), mode));
        assert!(payloads_conflict(&span(0, 5, "ORG"), &span(0, 5, "PER"), mode));
        assert!(payloads_conflict(&span(0, 5, "ORG"), &span(1, 4, "ORG"), mode));
        assert!(!payloads_conflict(&span(0, 5, "ORG"), &span(0, 5, "ORG"), mode));
    }

    #[test]
    fn class_conflicts_depend_on_mode() {
        assert!(payloads_conflict(&class("Y"), &class("W"), ClassificationMode::SingleLabel));
        assert!(!payloads_conflict(&class("Y"), &class("W"), ClassificationMode::MultiLabel));
        assert!(!payloads_conflict(&class("Y"), &span(0, 1, "A"), ClassificationMode::SingleLabel));
    }

    #[test]
    fn relation_conflicts_need_same_nodes() {
        let a = RelationNode::Ideal("a".into());
        let b = RelationNode::Ideal("b".into());
        let job = nt("Job", "1");
        let r1 = IdealPayload::Relation {
            edges: vec![edge(job.clone(), a.clone()), edge(job.clone(), b.clone())],
        };
        let r2 = IdealPayload::Relation {
            edges: vec![edge(job.clone(), a.clone()), edge(a.clone(), b.clone())],
        };
        let r3 = IdealPayload::Relation { edges: vec![edge(job, a)] };
        let mode = ClassificationMode::SingleLabel;
        assert!(payloads_conflict(&r1, &r2, mode));
        assert!(!payloads_conflict(&r1, &r3, mode));
    }

    #[test]
    fn forest_check() {
        let a = RelationNode::Ideal("a".into());
        let b = RelationNode::Ideal("b".into());
        let c = RelationNode::Ideal("c".into());
        assert!(check_forest(&[edge(a.clone(), b.clone()), edge(b.clone(), c.clone())]).is_ok());
        assert!(check_forest(&[edge(a.clone(), b.clone()), edge(b.clone(), a.clone())]).is_err());
        assert!(check_forest(&[edge(a.clone(), c.clone()), edge(b.clone(), c.clone())]).is_err());
        assert!(check_forest(&[edge(a.clone(), a.clone())]).is_err());
        assert!(check_forest(&[
            edge(a.clone(), b.clone()),
            edge(b.clone(), c.clone()),
            edge(c, a)
        ])
        .is_err());
    }

    #[test]
    fn canonical_relation_sorts_and_dedups() {
        let a = RelationNode::Ideal("a".into());
        let b = RelationNode::Ideal("b".into());
        let j = nt("Job", "1");
        let p1 = IdealPayload::Relation {
            edges: vec![edge(j.clone(), b.clone()), edge(j.clone(), a.clone())],
        };
        let p2 = IdealPayload::Relation {
            edges: vec![edge(j.clone(), a.clone()), edge(j.clone(), b.clone()), edge(j, a)],
        };
        assert_eq!(
            p1.canonicalize("x").unwrap().canonical_key(),
            p2.canonicalize("x").unwrap().canonical_key()
        );
    }

    #[test]
    fn payload_json_shape() {
        let json = serde_json::to_string(&span(2, 5, "A")).unwrap();
        assert_eq!(json, r#"{"type":"span","start":2,"end":5,"tag":"A"}"#);
        let rel: IdealPayload = serde_json::from_str(
            r#"{"type":"relation","edges":[{"parent":{"nonterminal":{"label":"Job","local_id":"1"}},"child":{"ideal":"x"},"label":"part"}]}"#,
        )
        .unwrap();
        assert_eq!(rel.kind(), IdealKind::Relation);
    }

    fn arb_payload() -> impl Strategy<Value = IdealPayload> {
        prop_oneof![
            (0usize..20, 1usize..6, prop::sample::select(vec!["A", "B"]))
                .prop_map(|(s, l, t)| span(s, s + l, t)),
            prop::sample::select(vec!["X", "Y", "Z"]).prop_map(class),
        ]
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "[ a-c\t]{1,12}", x in any::<prop::sample::Index>(), y in any::<prop::sample::Index>()) {
            let len = char_len(&text);
            let a = x.index(len);
            let b = a + 1 + y.index(len - a);
            if let Ok((s, e)) = normalize_span(&text, a, b) {
                prop_assert_eq!(normalize_span(&text, s, e), Ok((s, e)));
                let slice = char_slice(&text, s, e);
                prop_assert!(!slice.starts_with(char::is_whitespace));
                prop_assert!(!slice.ends_with(char::is_whitespace));
            }
        }

        #[test]
        fn conflict_is_symmetric_and_irreflexive(a in arb_payload(), b in arb_payload(), multi in any::<bool>()) {
            let mode = if multi { ClassificationMode::MultiLabel } else { ClassificationMode::SingleLabel };
            prop_assert_eq!(payloads_conflict(&a, &b, mode), payloads_conflict(&b, &a, mode));
            prop_assert!(!payloads_conflict(&a, &a, mode));
        }
    }
}
