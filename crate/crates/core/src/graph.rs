//! Knowledge graph construction: per-document graphs merged into a single
//! deduplicated graph that keeps sentence-level evidence for every edge.
//!
//! Edges are keyed by `(src, dst, label)` over canonical terms. The four
//! directed labels run arg1 -> arg2; `COMPARE` and `CONJUNCTION` store their
//! endpoints in lexicographic order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::document::{Document, EntityType, RelationType, Span};
use crate::index::{dominant_type, generic_spans, span_term, IndexError, IndexOptions};
use crate::lexicon::{CanonicalTerm, Lexicon};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unsupported export format `{0}` (expected `canonical-json` or `dot`)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KgNode {
    pub term: CanonicalTerm,
    /// `None` for terms that only occur as relation arguments.
    pub dominant_type: Option<EntityType>,
    pub mention_count: usize,
    pub type_counts: BTreeMap<EntityType, usize>,
}

impl KgNode {
    fn new(term: CanonicalTerm) -> Self {
        Self {
            term,
            dominant_type: None,
            mention_count: 0,
            type_counts: BTreeMap::new(),
        }
    }

    fn add(&mut self, label: EntityType, count: usize) {
        *self.type_counts.entry(label).or_default() += count;
        self.mention_count += count;
        self.dominant_type = dominant_type(&self.type_counts);
    }
}

/// Where an edge was observed. `arg1` is the span of `src`, `arg2` of `dst`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EdgeEvidence {
    pub doc_key: String,
    pub sentence_index: usize,
    pub arg1: Span,
    pub arg2: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub src: CanonicalTerm,
    pub dst: CanonicalTerm,
    pub label: RelationType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KgEdge {
    pub src: CanonicalTerm,
    pub dst: CanonicalTerm,
    pub label: RelationType,
    pub multiplicity: usize,
    /// Sorted; one entry per occurrence.
    pub provenance: Vec<EdgeEvidence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    pub nodes: BTreeMap<CanonicalTerm, KgNode>,
    pub edges: BTreeMap<EdgeKey, KgEdge>,
    pub source_corpora: Vec<String>,
}

impl KnowledgeGraph {
    fn node_mut(&mut self, term: &CanonicalTerm) -> &mut KgNode {
        self.nodes
            .entry(term.clone())
            .or_insert_with(|| KgNode::new(term.clone()))
    }

    /// Adds one relation occurrence, orienting symmetric labels.
    fn add_edge(
        &mut self,
        mut src: CanonicalTerm,
        mut dst: CanonicalTerm,
        label: RelationType,
        mut evidence: EdgeEvidence,
    ) {
        if label.is_symmetric() && dst < src {
            std::mem::swap(&mut src, &mut dst);
            std::mem::swap(&mut evidence.arg1, &mut evidence.arg2);
        }
        self.node_mut(&src);
        self.node_mut(&dst);
        let key = EdgeKey {
            src: src.clone(),
            dst: dst.clone(),
            label,
        };
        let edge = self.edges.entry(key).or_insert_with(|| KgEdge {
            src,
            dst,
            label,
            multiplicity: 0,
            provenance: Vec::new(),
        });
        edge.multiplicity += 1;
        edge.provenance.push(evidence);
    }

    fn sort_provenance(&mut self) {
        for edge in self.edges.values_mut() {
            edge.provenance.sort();
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.edges.values().map(|e| e.multiplicity).sum()
    }

    /// Folds `other` into `self`.
    pub fn absorb(&mut self, other: KnowledgeGraph) {
        for (term, node) in other.nodes {
            let mine = self.node_mut(&term);
            for (label, count) in node.type_counts {
                mine.add(label, count);
            }
        }
        for (key, edge) in other.edges {
            let mine = self.edges.entry(key).or_insert_with(|| KgEdge {
                src: edge.src.clone(),
                dst: edge.dst.clone(),
                label: edge.label,
                multiplicity: 0,
                provenance: Vec::new(),
            });
            mine.multiplicity += edge.multiplicity;
            mine.provenance.extend(edge.provenance);
            mine.provenance.sort();
        }
        self.source_corpora.extend(other.source_corpora);
        self.source_corpora.sort();
        self.source_corpora.dedup();
    }
}

/// Graph of a single document.
pub fn build_document_graph(
    doc: &Document,
    lexicon: &Lexicon,
    options: IndexOptions,
) -> Result<KnowledgeGraph, GraphError> {
    if let Some(source) = doc.validate().into_iter().next() {
        return Err(IndexError::InvalidDocument {
            doc_key: doc.doc_key.clone(),
            source,
        }
        .into());
    }
    let skip = if options.exclude_generic {
        generic_spans(doc)
    } else {
        HashSet::new()
    };
    let mut graph = KnowledgeGraph::default();
    for (_, entity) in doc.entities() {
        if options.exclude_generic && entity.label == EntityType::Generic {
            continue;
        }
        let (term, _) = span_term(doc, entity.span(), lexicon, options.use_aliases)?;
        graph.node_mut(&term).add(entity.label, 1);
    }
    for (sentence_index, rel) in doc.relations() {
        if skip.contains(&rel.arg1) || skip.contains(&rel.arg2) {
            continue;
        }
        let (src, _) = span_term(doc, rel.arg1, lexicon, options.use_aliases)?;
        let (dst, _) = span_term(doc, rel.arg2, lexicon, options.use_aliases)?;
        graph.add_edge(
            src,
            dst,
            rel.label,
            EdgeEvidence {
                doc_key: doc.doc_key.clone(),
                sentence_index,
                arg1: rel.arg1,
                arg2: rel.arg2,
            },
        );
    }
    graph.sort_provenance();
    Ok(graph)
}

/// Union of nodes and `(src, dst, label)`-deduplicated edges.
pub fn merge_graphs<I>(graphs: I) -> KnowledgeGraph
where
    I: IntoIterator<Item = KnowledgeGraph>,
{
    let mut merged = KnowledgeGraph::default();
    for g in graphs {
        merged.absorb(g);
    }
    merged
}

/// Merged graph of a whole corpus, tagged with its id.
pub fn build_corpus_graph(
    corpus_id: &str,
    docs: &[Document],
    lexicon: &Lexicon,
    options: IndexOptions,
) -> Result<KnowledgeGraph, GraphError> {
    let mut graph = KnowledgeGraph {
        source_corpora: vec![corpus_id.to_string()],
        ..Default::default()
    };
    for doc in docs {
        graph.absorb(build_document_graph(doc, lexicon, options)?);
    }
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    CanonicalJson,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical-json" | "json" => Ok(ExportFormat::CanonicalJson),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(GraphError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Emit one edge per occurrence instead of one per `(src, dst, label)`.
    pub keep_duplicates: bool,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    nodes: Vec<&'a KgNode>,
    edges: Vec<JsonEdge<'a>>,
    source_corpora: &'a [String],
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    src: &'a CanonicalTerm,
    dst: &'a CanonicalTerm,
    label: RelationType,
    symmetric: bool,
    multiplicity: usize,
    provenance: &'a [EdgeEvidence],
}

fn json_edges(kg: &KnowledgeGraph, options: ExportOptions) -> Vec<JsonEdge<'_>> {
    let mut out = Vec::new();
    for edge in kg.edges.values() {
        let base = |provenance, multiplicity| JsonEdge {
            src: &edge.src,
            dst: &edge.dst,
            label: edge.label,
            symmetric: edge.label.is_symmetric(),
            multiplicity,
            provenance,
        };
        if options.keep_duplicates {
            out.extend(edge.provenance.chunks(1).map(|p| base(p, 1)));
        } else {
            out.push(base(&edge.provenance, edge.multiplicity));
        }
    }
    out
}

fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn export_graph(kg: &KnowledgeGraph, format: ExportFormat) -> Vec<u8> {
    export_graph_with(kg, format, ExportOptions::default())
}

pub fn export_graph_with(kg: &KnowledgeGraph, format: ExportFormat, options: ExportOptions) -> Vec<u8> {
    match format {
        ExportFormat::CanonicalJson => {
            let doc = JsonGraph {
                nodes: kg.nodes.values().collect(),
                edges: json_edges(kg, options),
                source_corpora: &kg.source_corpora,
            };
            serde_json::to_vec(&doc).expect("graph serializes")
        }
        ExportFormat::Dot => {
            let mut out = String::from("digraph kg {\n");
            for node in kg.nodes.values() {
                let kind = node.dominant_type.map_or("none", EntityType::as_str);
                let _ = writeln!(
                    out,
                    "  {} [type=\"{kind}\", mentions={}];",
                    dot_id(node.term.as_str()),
                    node.mention_count
                );
            }
            for edge in json_edges(kg, options) {
                let dir = if edge.symmetric { ", dir=none" } else { "" };
                let _ = writeln!(
                    out,
                    "  {} -> {} [label=\"{}\", multiplicity={}{dir}];",
                    dot_id(edge.src.as_str()),
                    dot_id(edge.dst.as_str()),
                    edge.label,
                    edge.multiplicity
                );
            }
            out.push_str("}\n");
            out.into_bytes()
        }
    }
}

/// Terms referenced by edges but missing from `nodes`; always empty for
/// graphs built by this module.
pub fn dangling_endpoints(kg: &KnowledgeGraph) -> BTreeSet<CanonicalTerm> {
    kg.edges
        .values()
        .flat_map(|e| [&e.src, &e.dst])
        .filter(|t| !kg.nodes.contains_key(*t))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_document_line;
    use crate::lexicon::{AliasMap, Glossary};

    fn lexicon() -> Lexicon {
        let glossary = Glossary::from_terms(["decentralized application", "off-chain scaling"]);
        let aliases = AliasMap::new(
            [("decentralized application", ["dapps", "decentralized app"])],
            &glossary,
        )
        .unwrap();
        Lexicon::new(glossary, aliases)
    }

    fn doc(line: &str) -> Document {
        parse_document_line(line).unwrap()
    }

    const SCALING: &str = r#"{"doc_key":"wp1","sentences":[["Off-chain","scaling","helps","dApps","."],["Off-chain","scaling","serves","decentralized","app","users","."]],"ner":[[[0,1,"Method"],[3,3,"Task"]],[[5,6,"Method"],[8,9,"Task"]]],"relations":[[[0,1,3,3,"USED-FOR"]],[[5,6,8,9,"USED-FOR"]]]}"#;

    #[test]
    fn no_relations_no_edges() {
        let g = build_document_graph(
            &doc(r#"{"doc_key":"a","sentences":[["x","y"]],"ner":[[[0,0,"Task"]]],"relations":[[]]}"#),
            &lexicon(),
            IndexOptions::default(),
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn alias_folded_repeat_becomes_one_edge() {
        let g = build_document_graph(&doc(SCALING), &lexicon(), IndexOptions::default()).unwrap();
        assert_eq!(g.edge_count(), 1);
        let edge = g.edges.values().next().unwrap();
        assert_eq!(edge.src.as_str(), "off-chain scaling");
        assert_eq!(edge.dst.as_str(), "decentralized application");
        assert_eq!(edge.multiplicity, 2);
        assert_eq!(edge.provenance[1].sentence_index, 1);
        assert_eq!(g.nodes["decentralized application"].mention_count, 2);

        let no_alias = build_document_graph(
            &doc(SCALING),
            &lexicon(),
            IndexOptions {
                use_aliases: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(no_alias.edge_count(), 2);
    }

    #[test]
    fn symmetric_edges_are_ordered() {
        let d = doc(
            r#"{"doc_key":"s","sentences":[["zk","vs","amm"],["amm","or","zk"]],"ner":[[],[]],"relations":[[[0,0,2,2,"COMPARE"]],[[3,3,5,5,"COMPARE"]]]}"#,
        );
        let g = build_document_graph(&d, &lexicon(), IndexOptions::default()).unwrap();
        assert_eq!(g.edge_count(), 1);
        let edge = g.edges.values().next().unwrap();
        assert_eq!((edge.src.as_str(), edge.dst.as_str()), ("amm", "zk"));
        assert_eq!(edge.provenance[0].arg1, Span::new(2, 2));
        assert_eq!(edge.provenance[0].arg2, Span::new(0, 0));
        assert_eq!(g.nodes["amm"].dominant_type, None);
    }

    #[test]
    fn merge_identities() {
        assert_eq!(merge_graphs(Vec::new()), KnowledgeGraph::default());
        let g = build_corpus_graph("wp", &[doc(SCALING)], &lexicon(), IndexOptions::default()).unwrap();
        assert_eq!(merge_graphs([g.clone()]), g);
        let twice = merge_graphs([g.clone(), g.clone()]);
        assert_eq!(twice.edge_count(), 1);
        assert_eq!(twice.edges.values().next().unwrap().multiplicity, 4);
        assert_eq!(twice.source_corpora, vec!["wp"]);
    }

    #[test]
    fn dominant_type_recomputed_after_merge() {
        let a = doc(r#"{"doc_key":"a","sentences":[["x"]],"ner":[[[0,0,"Method"]]],"relations":[[]]}"#);
        let b =
            doc(r#"{"doc_key":"b","sentences":[["x","x"]],"ner":[[[0,0,"Task"],[1,1,"Metric"]]],"relations":[[]]}"#);
        let ga = build_document_graph(&a, &lexicon(), IndexOptions::default()).unwrap();
        let gb = build_document_graph(&b, &lexicon(), IndexOptions::default()).unwrap();
        assert_eq!(ga.nodes["x"].dominant_type, Some(EntityType::Method));
        let m = merge_graphs([ga, gb]);
        // Task, Method and Metric tie at 1; Task wins the tie-break.
        assert_eq!(m.nodes["x"].dominant_type, Some(EntityType::Task));
        assert_eq!(m.nodes["x"].mention_count, 3);
    }

    #[test]
    fn export_formats() {
        assert_eq!(
            export_graph(&KnowledgeGraph::default(), ExportFormat::CanonicalJson),
            br#"{"nodes":[],"edges":[],"source_corpora":[]}"#
        );
        assert!(matches!(
            "xml".parse::<ExportFormat>(),
            Err(GraphError::UnsupportedFormat(_))
        ));
        let g = build_corpus_graph("wp", &[doc(SCALING)], &lexicon(), IndexOptions::default()).unwrap();
        let dot = String::from_utf8(export_graph(&g, ExportFormat::Dot)).unwrap();
        assert_eq!(
            dot,
            "digraph kg {\n  \"decentralized application\" [type=\"Task\", mentions=2];\n  \"off-chain scaling\" [type=\"Method\", mentions=2];\n  \"off-chain scaling\" -> \"decentralized application\" [label=\"USED-FOR\", multiplicity=2];\n}\n"
        );
        assert_eq!(export_graph(&g, ExportFormat::Dot), export_graph(&g, ExportFormat::Dot));
        let expanded = export_graph_with(&g, ExportFormat::Dot, ExportOptions { keep_duplicates: true });
        assert_eq!(String::from_utf8(expanded).unwrap().matches("USED-FOR").count(), 2);
        assert_eq!(dot_id("a\"b\\"), "\"a\\\"b\\\\\"");
    }
}
