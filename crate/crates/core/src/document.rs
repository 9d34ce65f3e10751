//! The span-annotated jsonl document format.
//!
//! One record per line:
//!
//! ```text
//! {"doc_key":"d","dataset":"scierc","sentences":[["a","b"]],"ner":[[[0,1,"Method"]]],"relations":[[]]}
//! ```
//!
//! Token indices are document-global (cumulative over sentences) with an
//! inclusive end. Prediction output stores its annotations under
//! `predicted_ner` / `predicted_relations` / `predicted_clusters` and may
//! append confidence scores to every span array; both are accepted here.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Entity categories, in dominance tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Task,
    Method,
    Metric,
    Material,
    OtherScientificTerm,
    Generic,
}

impl EntityType {
    pub const ALL: [EntityType; 6] = [
        EntityType::Task,
        EntityType::Method,
        EntityType::Metric,
        EntityType::Material,
        EntityType::OtherScientificTerm,
        EntityType::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Task => "Task",
            EntityType::Method => "Method",
            EntityType::Metric => "Metric",
            EntityType::Material => "Material",
            EntityType::OtherScientificTerm => "OtherScientificTerm",
            EntityType::Generic => "Generic",
        }
    }
}

impl FromStr for EntityType {
    type Err = DocumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DocumentError::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    UsedFor,
    FeatureOf,
    HyponymOf,
    PartOf,
    Compare,
    Conjunction,
}

impl RelationType {
    pub const ALL: [RelationType; 6] = [
        RelationType::UsedFor,
        RelationType::FeatureOf,
        RelationType::HyponymOf,
        RelationType::PartOf,
        RelationType::Compare,
        RelationType::Conjunction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::UsedFor => "USED-FOR",
            RelationType::FeatureOf => "FEATURE-OF",
            RelationType::HyponymOf => "HYPONYM-OF",
            RelationType::PartOf => "PART-OF",
            RelationType::Compare => "COMPARE",
            RelationType::Conjunction => "CONJUNCTION",
        }
    }

    /// Symmetric relations have no meaningful argument order.
    pub fn is_symmetric(self) -> bool {
        matches!(self, RelationType::Compare | RelationType::Conjunction)
    }
}

impl FromStr for RelationType {
    type Err = DocumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // "functionality-of" is an older name for FEATURE-OF.
        if s.eq_ignore_ascii_case("FUNCTIONALITY-OF") {
            return Ok(RelationType::FeatureOf);
        }
        RelationType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DocumentError::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// An inclusive, document-global token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Number of tokens covered.
    pub fn token_len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: EntityType,
}

impl EntitySpan {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSpan {
    pub arg1: Span,
    pub arg2: Span,
    pub label: RelationType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_key: String,
    pub dataset: Option<String>,
    pub sentences: Vec<Vec<String>>,
    pub ner: Vec<Vec<EntitySpan>>,
    pub relations: Vec<Vec<RelationSpan>>,
    pub clusters: Option<Vec<Vec<Span>>>,
}

/// A single broken document invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("doc_key is empty")]
    EmptyDocKey,
    #[error("sentence {sentence} has no tokens")]
    EmptySentence { sentence: usize },
    #[error("`{field}` has {found} entries but there are {expected} sentences")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("span ({start}, {end}) is outside the {token_count} document tokens")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        token_count: usize,
    },
    #[error("span ({start}, {end}) is not contained in sentence {sentence}")]
    CrossSentenceSpan { start: usize, end: usize, sentence: usize },
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Invalid(#[from] Violation),
}

/// Sentence offsets into the document-global token stream.
#[derive(Debug, Clone)]
pub struct TokenLayout {
    /// `starts[i]` is the global index of sentence `i`'s first token;
    /// the final entry is the total token count.
    starts: Vec<usize>,
}

impl TokenLayout {
    pub fn new(sentences: &[Vec<String>]) -> Self {
        let mut starts = Vec::with_capacity(sentences.len() + 1);
        let mut acc = 0;
        starts.push(0);
        for s in sentences {
            acc += s.len();
            starts.push(acc);
        }
        Self { starts }
    }

    pub fn token_count(&self) -> usize {
        *self.starts.last().unwrap_or(&0)
    }

    /// Global token range `[start, end)` of sentence `i`.
    pub fn sentence_range(&self, i: usize) -> std::ops::Range<usize> {
        self.starts[i]..self.starts[i + 1]
    }

    pub fn sentence_of(&self, token: usize) -> Result<usize, Violation> {
        if token >= self.token_count() {
            return Err(Violation::SpanOutOfBounds {
                start: token,
                end: token,
                token_count: self.token_count(),
            });
        }
        // Empty sentences share a start offset; the partition point skips them.
        Ok(self.starts.partition_point(|&s| s <= token) - 1)
    }

    fn check_bounds(&self, span: Span) -> Result<(), Violation> {
        if span.start > span.end || span.end >= self.token_count() {
            return Err(Violation::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                token_count: self.token_count(),
            });
        }
        Ok(())
    }

    /// Checks bounds and that `span` lies inside sentence `sentence`.
    pub fn check_in_sentence(&self, span: Span, sentence: usize) -> Result<(), Violation> {
        self.check_bounds(span)?;
        let range = self.sentence_range(sentence);
        if span.start < range.start || span.end >= range.end {
            return Err(Violation::CrossSentenceSpan {
                start: span.start,
                end: span.end,
                sentence,
            });
        }
        Ok(())
    }

    /// Sentence holding the whole span, if any.
    pub fn containing_sentence(&self, span: Span) -> Result<usize, Violation> {
        self.check_bounds(span)?;
        let sentence = self.sentence_of(span.start)?;
        self.check_in_sentence(span, sentence)?;
        Ok(sentence)
    }
}

impl Document {
    pub fn layout(&self) -> TokenLayout {
        TokenLayout::new(&self.sentences)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn entity_count(&self) -> usize {
        self.ner.iter().map(Vec::len).sum()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.iter().map(Vec::len).sum()
    }

    /// Iterates `(sentence_index, span)` over every entity span.
    pub fn entities(&self) -> impl Iterator<Item = (usize, &EntitySpan)> {
        self.ner
            .iter()
            .enumerate()
            .flat_map(|(i, spans)| spans.iter().map(move |s| (i, s)))
    }

    pub fn relations(&self) -> impl Iterator<Item = (usize, &RelationSpan)> {
        self.relations
            .iter()
            .enumerate()
            .flat_map(|(i, rels)| rels.iter().map(move |r| (i, r)))
    }

    /// Returns every invariant violation; an empty list means the document is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.doc_key.is_empty() {
            out.push(Violation::EmptyDocKey);
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.is_empty() {
                out.push(Violation::EmptySentence { sentence: i });
            }
        }
        let n = self.sentences.len();
        let mut lengths_ok = true;
        for (field, found) in [("ner", self.ner.len()), ("relations", self.relations.len())] {
            if found != n {
                lengths_ok = false;
                out.push(Violation::LengthMismatch {
                    field,
                    expected: n,
                    found,
                });
            }
        }
        let layout = self.layout();
        if lengths_ok {
            for (i, span) in self.entities() {
                if let Err(v) = layout.check_in_sentence(span.span(), i) {
                    out.push(v);
                }
            }
            for (i, rel) in self.relations() {
                for arg in [rel.arg1, rel.arg2] {
                    if let Err(v) = layout.check_in_sentence(arg, i) {
                        out.push(v);
                    }
                }
            }
        }
        for cluster in self.clusters.iter().flatten() {
            for &span in cluster {
                if let Err(v) = layout.containing_sentence(span) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Tokens of `[start, end]` joined by single spaces.
    pub fn resolve_span(&self, start: usize, end: usize) -> Result<String, Violation> {
        let layout = self.layout();
        layout.containing_sentence(Span::new(start, end))?;
        Ok(self
            .sentences
            .iter()
            .flatten()
            .skip(start)
            .take(end - start + 1)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" "))
    }

    pub fn sentence_of_span(&self, start: usize) -> Result<usize, Violation> {
        self.layout().sentence_of(start)
    }

    pub fn sentence_text(&self, sentence: usize) -> Option<String> {
        self.sentences.get(sentence).map(|tokens| tokens.join(" "))
    }

    /// Canonical one-line encoding with fixed key order.
    pub fn to_json_line(&self) -> String {
        let mut out = String::with_capacity(256);
        out.push_str("{\"doc_key\":");
        push_json_str(&mut out, &self.doc_key);
        if let Some(dataset) = &self.dataset {
            out.push_str(",\"dataset\":");
            push_json_str(&mut out, dataset);
        }
        out.push_str(",\"sentences\":[");
        for (i, sentence) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push('[');
            for (j, tok) in sentence.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                push_json_str(&mut out, tok);
            }
            out.push(']');
        }
        out.push_str("],\"ner\":");
        push_nested(&mut out, &self.ner, |out, e| {
            out.push_str(&format!("[{},{},\"{}\"]", e.start, e.end, e.label))
        });
        out.push_str(",\"relations\":");
        push_nested(&mut out, &self.relations, |out, r| {
            out.push_str(&format!(
                "[{},{},{},{},\"{}\"]",
                r.arg1.start, r.arg1.end, r.arg2.start, r.arg2.end, r.label
            ))
        });
        if let Some(clusters) = &self.clusters {
            out.push_str(",\"clusters\":");
            push_nested(&mut out, clusters, |out, s| {
                out.push_str(&format!("[{},{}]", s.start, s.end))
            });
        }
        out.push('}');
        out
    }
}

fn push_json_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

fn push_nested<T>(out: &mut String, lists: &[Vec<T>], mut item: impl FnMut(&mut String, &T)) {
    out.push('[');
    for (i, list) in lists.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, x) in list.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            item(out, x);
        }
        out.push(']');
    }
    out.push(']');
}

pub fn serialize_document(doc: &Document) -> String {
    doc.to_json_line()
}

pub fn validate_document(doc: &Document) -> Vec<Violation> {
    doc.validate()
}

pub fn resolve_span(doc: &Document, start: usize, end: usize) -> Result<String, Violation> {
    doc.resolve_span(start, end)
}

pub fn sentence_of_span(doc: &Document, start: usize) -> Result<usize, Violation> {
    doc.sentence_of_span(start)
}

/// Parses and validates one jsonl record.
pub fn parse_document_line(line: &str) -> Result<Document, DocumentError> {
    let doc = parse_record(line)?;
    if let Some(v) = doc.validate().into_iter().next() {
        return Err(v.into());
    }
    Ok(doc)
}

fn malformed(msg: impl Into<String>) -> DocumentError {
    DocumentError::MalformedRecord(msg.into())
}

/// Structural parse without invariant checks; see [`parse_document_line`].
pub fn parse_record(line: &str) -> Result<Document, DocumentError> {
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| malformed("record is not an object"))?;
    let pick = |key: &str| obj.get(&format!("predicted_{key}")).or_else(|| obj.get(key));

    let doc_key = obj
        .get("doc_key")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing string `doc_key`"))?
        .to_string();
    let dataset = match obj.get("dataset") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(malformed("`dataset` is not a string")),
    };
    let sentences = array(obj.get("sentences"), "sentences")?
        .iter()
        .map(|s| {
            array(Some(s), "sentence")?
                .iter()
                .map(|t| {
                    t.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| malformed("token is not a string"))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = sentences.len();

    let ner = match pick("ner") {
        None => vec![Vec::new(); n],
        Some(v) => nested(v, "ner", parse_entity)?,
    };
    let relations = match pick("relations") {
        None => vec![Vec::new(); n],
        Some(v) => nested(v, "relations", parse_relation)?,
    };
    let clusters = match pick("clusters") {
        None | Some(Value::Null) => None,
        Some(v) => Some(nested(v, "clusters", parse_cluster_span)?),
    };
    Ok(Document {
        doc_key,
        dataset,
        sentences,
        ner,
        relations,
        clusters,
    })
}

fn array<'a>(v: Option<&'a Value>, what: &str) -> Result<&'a Vec<Value>, DocumentError> {
    v.and_then(Value::as_array)
        .ok_or_else(|| malformed(format!("`{what}` is not an array")))
}

fn nested<T>(
    v: &Value,
    what: &str,
    item: impl Fn(&[Value]) -> Result<T, DocumentError>,
) -> Result<Vec<Vec<T>>, DocumentError> {
    array(Some(v), what)?
        .iter()
        .map(|inner| {
            array(Some(inner), what)?
                .iter()
                .map(|x| item(array(Some(x), what)?))
                .collect()
        })
        .collect()
}

fn index(v: &Value) -> Result<usize, DocumentError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| malformed(format!("expected a token index, found {v}")))
}

fn label(v: &Value) -> Result<&str, DocumentError> {
    v.as_str()
        .ok_or_else(|| malformed(format!("expected a label, found {v}")))
}

/// Trailing elements after the fixed fields must be numeric (scores).
fn check_scores(extra: &[Value]) -> Result<(), DocumentError> {
    match extra.iter().find(|x| !x.is_number()) {
        Some(x) => Err(malformed(format!("unexpected trailing element {x}"))),
        None => Ok(()),
    }
}

fn parse_entity(a: &[Value]) -> Result<EntitySpan, DocumentError> {
    if a.len() < 3 {
        return Err(malformed("entity span needs [start, end, label]"));
    }
    check_scores(&a[3..])?;
    Ok(EntitySpan {
        start: index(&a[0])?,
        end: index(&a[1])?,
        label: label(&a[2])?.parse()?,
    })
}

fn parse_relation(a: &[Value]) -> Result<RelationSpan, DocumentError> {
    if a.len() < 5 {
        return Err(malformed("relation needs [s1, e1, s2, e2, label]"));
    }
    check_scores(&a[5..])?;
    Ok(RelationSpan {
        arg1: Span::new(index(&a[0])?, index(&a[1])?),
        arg2: Span::new(index(&a[2])?, index(&a[3])?),
        label: label(&a[4])?.parse()?,
    })
}

fn parse_cluster_span(a: &[Value]) -> Result<Span, DocumentError> {
    if a.len() < 2 {
        return Err(malformed("cluster member needs [start, end]"));
    }
    check_scores(&a[2..])?;
    Ok(Span::new(index(&a[0])?, index(&a[1])?))
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Record {
        path: String,
        line: usize,
        doc_key: Option<String>,
        #[source]
        source: DocumentError,
    },
    #[error("{path}: duplicate doc_key `{doc_key}`")]
    DuplicateDocKey { path: String, doc_key: String },
}

/// Reads and validates a jsonl corpus. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, &path.display().to_string())
}

pub fn parse_corpus(text: &str, origin: &str) -> Result<Vec<Document>, CorpusError> {
    let mut docs: Vec<Document> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_document_line(line).map_err(|source| CorpusError::Record {
            path: origin.to_string(),
            line: i + 1,
            doc_key: serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("doc_key")?.as_str().map(str::to_string)),
            source,
        })?;
        if !seen.insert(doc.doc_key.clone()) {
            return Err(CorpusError::DuplicateDocKey {
                path: origin.to_string(),
                doc_key: doc.doc_key,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Serializes a corpus as jsonl, one canonical line per document.
pub fn write_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.to_json_line());
        out.push('\n');
    }
    out
}
