//! Post-processing for span-based scientific information extraction output.
//!
//! Reads the jsonl prediction format (tokenized sentences with
//! document-global entity spans and relation tuples), builds an alias-aware
//! entity dictionary and a merged knowledge graph with sentence-level
//! provenance, scores predictions against gold annotations, and serves the
//! results over a read-only HTTP API.
//!
//! ```
//! use spankg::{build_entity_index, frequency_list, parse_document_line, IndexOptions, Lexicon};
//!
//! let doc = parse_document_line(
//!     r#"{"doc_key":"d","sentences":[["Smart","contracts","."]],"ner":[[[0,1,"Method"]]],"relations":[[]]}"#,
//! )
//! .unwrap();
//! let index = build_entity_index("demo", &[doc], &Lexicon::default(), IndexOptions::default()).unwrap();
//! assert_eq!(frequency_list(&index)[0].1, 1);
//! ```

pub mod api;
pub mod document;
pub mod eval;
pub mod graph;
pub mod index;
pub mod lexicon;
pub mod prep;
#[cfg(feature = "synth")]
pub mod synth;

pub use document::{
    parse_document_line, read_corpus, resolve_span, sentence_of_span, serialize_document, validate_document,
    CorpusError, Document, DocumentError, EntitySpan, EntityType, RelationSpan, RelationType, Span, Violation,
};
pub use eval::{evaluate_corpus, match_entities, match_relations, noun_overlap, EvaluationReport, MatchMode, Ratio};
pub use graph::{build_corpus_graph, build_document_graph, export_graph, merge_graphs, ExportFormat, KnowledgeGraph};
pub use index::{
    build_entity_index, coverage_report, frequency_list, glossary_entities, CoverageReport, EntityIndex, EntityRecord,
    IndexOptions,
};
pub use lexicon::{canonicalize, normalize_term, CanonicalTerm, Glossary, Lexicon};
pub use prep::{format_document, split_sentences, strip_line_breaks, tokenize};
