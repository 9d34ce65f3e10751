//! The entity dictionary: canonical term to type counts, mention locations,
//! and relation participations, plus the analytics derived from it.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::document::{Document, EntityType, RelationType, Span};
use crate::lexicon::{canonicalize, normalize_term, CanonicalTerm, Glossary, Lexicon, LexiconError};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate doc_key `{0}`")]
    DuplicateDocKey(String),
    #[error("document `{doc_key}`: {source}")]
    InvalidDocument {
        doc_key: String,
        #[source]
        source: crate::document::Violation,
    },
    #[error("document `{doc_key}`: span ({start}, {end}) has no usable text")]
    EmptySpan { doc_key: String, start: usize, end: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexOptions {
    pub use_aliases: bool,
    /// Skip `Generic` entity spans and any relation touching one.
    pub exclude_generic: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            use_aliases: true,
            exclude_generic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MentionRef {
    pub doc_key: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RelationRef {
    pub doc_key: String,
    pub sentence_index: usize,
    pub label: RelationType,
    pub side: Side,
    pub other: CanonicalTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityRecord {
    pub canonical: CanonicalTerm,
    pub type_counts: BTreeMap<EntityType, usize>,
    pub mentions: Vec<MentionRef>,
    pub relations: Vec<RelationRef>,
    /// Normalized surface forms folded into this record.
    pub alias_forms: BTreeSet<String>,
}

impl EntityRecord {
    fn new(canonical: CanonicalTerm) -> Self {
        Self {
            canonical,
            type_counts: BTreeMap::new(),
            mentions: Vec::new(),
            relations: Vec::new(),
            alias_forms: BTreeSet::new(),
        }
    }

    pub fn mention_count(&self) -> usize {
        self.mentions.len()
    }

    /// Most frequent type; ties go to the earlier type in declaration order.
    pub fn dominant_type(&self) -> Option<EntityType> {
        dominant_type(&self.type_counts)
    }

    fn absorb(&mut self, other: EntityRecord) {
        for (t, c) in other.type_counts {
            *self.type_counts.entry(t).or_default() += c;
        }
        self.mentions.extend(other.mentions);
        self.relations.extend(other.relations);
        self.alias_forms.extend(other.alias_forms);
    }
}

pub(crate) fn dominant_type(counts: &BTreeMap<EntityType, usize>) -> Option<EntityType> {
    let mut best: Option<(EntityType, usize)> = None;
    for (&t, &c) in counts {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((t, c));
        }
    }
    best.map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityIndex {
    pub corpus_id: String,
    pub records: BTreeMap<CanonicalTerm, EntityRecord>,
    pub total_mentions: usize,
    pub total_relations: usize,
}

/// Canonicalizes the text of `span`, returning the term and its normalized form.
pub(crate) fn span_term(
    doc: &Document,
    span: Span,
    lexicon: &Lexicon,
    use_aliases: bool,
) -> Result<(CanonicalTerm, String), IndexError> {
    let text = doc
        .resolve_span(span.start, span.end)
        .map_err(|source| IndexError::InvalidDocument {
            doc_key: doc.doc_key.clone(),
            source,
        })?;
    let term = canonicalize(&text, lexicon, use_aliases).map_err(|_: LexiconError| IndexError::EmptySpan {
        doc_key: doc.doc_key.clone(),
        start: span.start,
        end: span.end,
    })?;
    Ok((term, normalize_term(&text)))
}

/// Spans labelled `Generic` in a document, for exclusion.
pub(crate) fn generic_spans(doc: &Document) -> HashSet<Span> {
    doc.entities()
        .filter(|(_, e)| e.label == EntityType::Generic)
        .map(|(_, e)| e.span())
        .collect()
}

impl EntityIndex {
    pub fn empty(corpus_id: impl Into<String>) -> Self {
        Self {
            corpus_id: corpus_id.into(),
            records: BTreeMap::new(),
            total_mentions: 0,
            total_relations: 0,
        }
    }

    /// Builds the dictionary for one corpus.
    pub fn build(
        corpus_id: impl Into<String>,
        docs: &[Document],
        lexicon: &Lexicon,
        options: IndexOptions,
    ) -> Result<Self, IndexError> {
        let mut seen = HashSet::new();
        let mut index = EntityIndex::empty(corpus_id);
        for doc in docs {
            if !seen.insert(doc.doc_key.as_str()) {
                return Err(IndexError::DuplicateDocKey(doc.doc_key.clone()));
            }
            index.merge(Self::build_document(&index.corpus_id, doc, lexicon, options)?);
        }
        Ok(index)
    }

    /// Partial index for a single document.
    pub fn build_document(
        corpus_id: &str,
        doc: &Document,
        lexicon: &Lexicon,
        options: IndexOptions,
    ) -> Result<Self, IndexError> {
        if let Some(source) = doc.validate().into_iter().next() {
            return Err(IndexError::InvalidDocument {
                doc_key: doc.doc_key.clone(),
                source,
            });
        }
        let mut index = EntityIndex::empty(corpus_id);
        let skip = if options.exclude_generic {
            generic_spans(doc)
        } else {
            HashSet::new()
        };
        for (sentence_index, entity) in doc.entities() {
            if options.exclude_generic && entity.label == EntityType::Generic {
                continue;
            }
            let (term, form) = span_term(doc, entity.span(), lexicon, options.use_aliases)?;
            let record = index.record_mut(term);
            record.alias_forms.insert(form);
            *record.type_counts.entry(entity.label).or_default() += 1;
            record.mentions.push(MentionRef {
                doc_key: doc.doc_key.clone(),
                sentence_index,
                start: entity.start,
                end: entity.end,
            });
            index.total_mentions += 1;
        }
        for (sentence_index, rel) in doc.relations() {
            if skip.contains(&rel.arg1) || skip.contains(&rel.arg2) {
                continue;
            }
            let (left, left_form) = span_term(doc, rel.arg1, lexicon, options.use_aliases)?;
            let (right, right_form) = span_term(doc, rel.arg2, lexicon, options.use_aliases)?;
            let reference = |side, other: &CanonicalTerm| RelationRef {
                doc_key: doc.doc_key.clone(),
                sentence_index,
                label: rel.label,
                side,
                other: other.clone(),
            };
            let left_ref = reference(Side::Left, &right);
            let right_ref = reference(Side::Right, &left);
            let record = index.record_mut(left);
            record.alias_forms.insert(left_form);
            record.relations.push(left_ref);
            let record = index.record_mut(right);
            record.alias_forms.insert(right_form);
            record.relations.push(right_ref);
            index.total_relations += 1;
        }
        Ok(index)
    }

    fn record_mut(&mut self, term: CanonicalTerm) -> &mut EntityRecord {
        self.records
            .entry(term.clone())
            .or_insert_with(|| EntityRecord::new(term))
    }

    /// Pointwise record union with count addition.
    pub fn merge(&mut self, other: EntityIndex) {
        for (term, record) in other.records {
            match self.records.get_mut(&term) {
                Some(existing) => existing.absorb(record),
                None => {
                    self.records.insert(term, record);
                }
            }
        }
        self.total_mentions += other.total_mentions;
        self.total_relations += other.total_relations;
    }

    pub fn get(&self, term: &str) -> Option<&EntityRecord> {
        self.records.get(term)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn build_entity_index(
    corpus_id: &str,
    docs: &[Document],
    lexicon: &Lexicon,
    options: IndexOptions,
) -> Result<EntityIndex, IndexError> {
    EntityIndex::build(corpus_id, docs, lexicon, options)
}

/// `(term, mention count)` for every record, most frequent first; ties
/// ordered by term.
pub fn frequency_list(index: &EntityIndex) -> Vec<(CanonicalTerm, usize)> {
    let mut list: Vec<_> = index
        .records
        .values()
        .map(|r| (r.canonical.clone(), r.mention_count()))
        .collect();
    list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    list
}

/// Glossary terms detected at least once, with their mention counts.
pub fn glossary_entities(index: &EntityIndex, glossary: &Glossary) -> BTreeMap<CanonicalTerm, usize> {
    index
        .records
        .values()
        .filter(|r| r.mention_count() > 0 && glossary.contains(r.canonical.as_str()))
        .map(|r| (r.canonical.clone(), r.mention_count()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub corpus_id: String,
    pub glossary_size: usize,
    pub detected: usize,
    pub percent_detected: u32,
    /// Relation participations owned by glossary records; a relation
    /// between two glossary terms counts once per endpoint.
    pub glossary_relation_count: usize,
    pub detected_terms: BTreeSet<CanonicalTerm>,
}

impl CoverageReport {
    /// e.g. `25 out of 47 terms detected (53%)`
    pub fn summary(&self) -> String {
        format!(
            "{} out of {} terms detected ({}%)",
            self.detected, self.glossary_size, self.percent_detected
        )
    }
}

/// `round(100 * part / whole)` with halves rounded up; 0 when `whole` is 0.
pub fn percent_half_up(part: usize, whole: usize) -> u32 {
    if whole == 0 {
        return 0;
    }
    ((200 * part + whole) / (2 * whole)) as u32
}

pub fn coverage_report(index: &EntityIndex, glossary: &Glossary) -> CoverageReport {
    let detected_terms: BTreeSet<CanonicalTerm> = glossary_entities(index, glossary).into_keys().collect();
    let glossary_relation_count = index
        .records
        .values()
        .filter(|r| glossary.contains(r.canonical.as_str()))
        .map(|r| r.relations.len())
        .sum();
    CoverageReport {
        corpus_id: index.corpus_id.clone(),
        glossary_size: glossary.len(),
        detected: detected_terms.len(),
        percent_detected: percent_half_up(detected_terms.len(), glossary.len()),
        glossary_relation_count,
        detected_terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_document_line;
    use crate::lexicon::AliasMap;

    fn lexicon() -> Lexicon {
        let glossary = Glossary::from_terms(["smart-contract", "blockchain"]);
        let aliases = AliasMap::new([("smart-contract", ["smart contract", "smart contracts"])], &glossary).unwrap();
        Lexicon::new(glossary, aliases)
    }

    fn doc() -> Document {
        parse_document_line(
            r#"{"doc_key":"d","sentences":[["Smart","contracts","run","on","blockchain","."],["A","smart-contract","is","code","."]],"ner":[[[0,1,"Method"],[4,4,"Material"]],[[7,7,"Method"],[9,9,"Generic"]]],"relations":[[[0,1,4,4,"USED-FOR"]],[[7,7,9,9,"HYPONYM-OF"]]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn empty_corpus() {
        let index = build_entity_index("c", &[], &lexicon(), IndexOptions::default()).unwrap();
        assert!(index.is_empty());
        assert!(frequency_list(&index).is_empty());
    }

    #[test]
    fn aliases_fold_records() {
        let on = build_entity_index("c", &[doc()], &lexicon(), IndexOptions::default()).unwrap();
        let sc = on.get("smart-contract").unwrap();
        assert_eq!(sc.mention_count(), 2);
        assert_eq!(sc.type_counts[&EntityType::Method], 2);
        assert_eq!(
            sc.alias_forms.iter().map(String::as_str).collect::<Vec<_>>(),
            vec!["smart contracts", "smart-contract"]
        );
        assert_eq!(on.len(), 3);

        let off = build_entity_index(
            "c",
            &[doc()],
            &lexicon(),
            IndexOptions {
                use_aliases: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(off.get("smart contracts").unwrap().mention_count(), 1);
        assert_eq!(off.get("smart-contract").unwrap().mention_count(), 1);
        assert_eq!(off.total_mentions, on.total_mentions);
        assert_eq!(off.len(), 4);
    }

    #[test]
    fn relations_are_mirrored() {
        let index = build_entity_index("c", &[doc()], &lexicon(), IndexOptions::default()).unwrap();
        let sc = index.get("smart-contract").unwrap();
        let bc = index.get("blockchain").unwrap();
        assert!(sc.relations.contains(&RelationRef {
            doc_key: "d".into(),
            sentence_index: 0,
            label: RelationType::UsedFor,
            side: Side::Left,
            other: bc.canonical.clone(),
        }));
        assert_eq!(bc.relations[0].side, Side::Right);
        assert_eq!(bc.relations[0].other, sc.canonical);
        assert_eq!(index.total_relations, 2);
    }

    #[test]
    fn relation_only_endpoints_get_empty_records() {
        let d = parse_document_line(
            r#"{"doc_key":"e","sentences":[["a","b","c"]],"ner":[[[0,0,"Task"]]],"relations":[[[0,0,2,2,"PART-OF"]]]}"#,
        )
        .unwrap();
        let index = build_entity_index("c", &[d], &lexicon(), IndexOptions::default()).unwrap();
        let c = index.get("c").unwrap();
        assert!(c.mentions.is_empty());
        assert_eq!(c.relations.len(), 1);
        assert_eq!(c.dominant_type(), None);
        assert_eq!(frequency_list(&index).last().unwrap().1, 0);
    }

    #[test]
    fn generic_exclusion() {
        let opts = IndexOptions {
            exclude_generic: true,
            ..Default::default()
        };
        let index = build_entity_index("c", &[doc()], &lexicon(), opts).unwrap();
        assert!(index.get("code").is_none());
        assert_eq!(index.total_mentions, 3);
        assert_eq!(index.total_relations, 1);
    }

    #[test]
    fn duplicate_doc_keys_rejected() {
        let err = build_entity_index("c", &[doc(), doc()], &lexicon(), IndexOptions::default()).unwrap_err();
        assert!(matches!(err, IndexError::DuplicateDocKey(k) if k == "d"));
    }

    #[test]
    fn frequency_ordering() {
        let mut index = EntityIndex::empty("c");
        for (term, n) in [("a", 1), ("b", 2), ("c", 2)] {
            let mut r = EntityRecord::new(CanonicalTerm::new(term).unwrap());
            r.mentions = vec![
                MentionRef {
                    doc_key: "d".into(),
                    sentence_index: 0,
                    start: 0,
                    end: 0
                };
                n
            ];
            index.records.insert(r.canonical.clone(), r);
        }
        let list: Vec<_> = frequency_list(&index)
            .into_iter()
            .map(|(t, n)| (t.into_string(), n))
            .collect();
        assert_eq!(list, vec![("b".into(), 2), ("c".into(), 2), ("a".into(), 1)]);
    }

    #[test]
    fn glossary_detection() {
        let index = build_entity_index("c", &[doc()], &lexicon(), IndexOptions::default()).unwrap();
        let found = glossary_entities(&index, &lexicon().glossary);
        assert_eq!(found.len(), 2);
        assert_eq!(found["blockchain"], 1);
        let g = Glossary::from_terms(["blockchain", "oracle"]);
        let found = glossary_entities(&index, &g);
        assert!(!found.contains_key("oracle"));
    }

    #[test]
    fn coverage_rounding() {
        assert_eq!(percent_half_up(25, 47), 53);
        assert_eq!(percent_half_up(17, 47), 36);
        assert_eq!(percent_half_up(16, 47), 34);
        assert_eq!(percent_half_up(0, 47), 0);
        assert_eq!(percent_half_up(1, 8), 13);
        assert_eq!(percent_half_up(3, 3), 100);

        let index = build_entity_index("c", &[doc()], &lexicon(), IndexOptions::default()).unwrap();
        let report = coverage_report(&index, &lexicon().glossary);
        assert_eq!(report.detected, 2);
        assert_eq!(report.percent_detected, 100);
        // USED-FOR between two glossary terms counts for both endpoints,
        // plus the HYPONYM-OF on smart-contract.
        assert_eq!(report.glossary_relation_count, 3);
        assert_eq!(report.summary(), "2 out of 2 terms detected (100%)");
    }
}
