mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use spankg::graph::{dangling_endpoints, export_graph_with, ExportOptions};
use spankg::synth::{self, random_corpus, random_document, SynthParams};
use spankg::{
    build_corpus_graph, build_document_graph, canonicalize, export_graph, merge_graphs, read_corpus, Document,
    ExportFormat, IndexOptions, KnowledgeGraph, RelationType,
};

fn doc_graph(seed: u64, key: &str) -> KnowledgeGraph {
    let doc = random_document(&mut StdRng::seed_from_u64(seed), key, &SynthParams::default());
    build_document_graph(&doc, &synth::lexicon(), IndexOptions::default()).unwrap()
}

proptest! {
    #[test]
    fn merge_is_commutative_and_associative(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (ga, gb, gc) = (doc_graph(a, "a"), doc_graph(b, "b"), doc_graph(c, "c"));
        let ab = merge_graphs([ga.clone(), gb.clone()]);
        prop_assert_eq!(&ab, &merge_graphs([gb.clone(), ga.clone()]));
        let left = merge_graphs([ab, gc.clone()]);
        let right = merge_graphs([ga, merge_graphs([gb, gc])]);
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(
            export_graph(&left, ExportFormat::CanonicalJson),
            export_graph(&right, ExportFormat::CanonicalJson)
        );
    }

    #[test]
    fn edges_are_unique_and_conserve_multiplicity(seed in any::<u64>()) {
        let docs = random_corpus(&mut StdRng::seed_from_u64(seed), &SynthParams::default());
        let kg = build_corpus_graph("p", &docs, &synth::lexicon(), IndexOptions::default()).unwrap();
        let relations: usize = docs.iter().map(Document::relation_count).sum();
        prop_assert_eq!(kg.total_multiplicity(), relations);
        let mut seen = BTreeMap::new();
        for (key, edge) in &kg.edges {
            prop_assert_eq!((&key.src, &key.dst, key.label), (&edge.src, &edge.dst, edge.label));
            prop_assert_eq!(edge.multiplicity, edge.provenance.len());
            prop_assert!(edge.provenance.windows(2).all(|w| w[0] <= w[1]));
            if edge.label.is_symmetric() {
                prop_assert!(edge.src <= edge.dst);
            }
            prop_assert!(seen.insert((edge.src.clone(), edge.dst.clone(), edge.label), ()).is_none());
        }
        prop_assert!(dangling_endpoints(&kg).is_empty());
    }

    #[test]
    fn provenance_resolves_to_the_endpoints(seed in any::<u64>()) {
        let docs = random_corpus(&mut StdRng::seed_from_u64(seed), &SynthParams::default());
        let lex = synth::lexicon();
        let kg = build_corpus_graph("p", &docs, &lex, IndexOptions::default()).unwrap();
        let by_key: BTreeMap<_, _> = docs.iter().map(|d| (d.doc_key.as_str(), d)).collect();
        for edge in kg.edges.values() {
            for ev in &edge.provenance {
                let doc = by_key[ev.doc_key.as_str()];
                prop_assert_eq!(doc.sentence_of_span(ev.arg1.start).unwrap(), ev.sentence_index);
                prop_assert_eq!(doc.sentence_of_span(ev.arg2.end).unwrap(), ev.sentence_index);
                let src = canonicalize(&doc.resolve_span(ev.arg1.start, ev.arg1.end).unwrap(), &lex, true).unwrap();
                let dst = canonicalize(&doc.resolve_span(ev.arg2.start, ev.arg2.end).unwrap(), &lex, true).unwrap();
                prop_assert_eq!(&src, &edge.src);
                prop_assert_eq!(&dst, &edge.dst);
            }
        }
    }

    #[test]
    fn keep_duplicates_expands_every_occurrence(seed in any::<u64>()) {
        let docs = random_corpus(&mut StdRng::seed_from_u64(seed), &SynthParams::default());
        let kg = build_corpus_graph("p", &docs, &synth::lexicon(), IndexOptions::default()).unwrap();
        let body = export_graph_with(&kg, ExportFormat::CanonicalJson, ExportOptions { keep_duplicates: true });
        let value: serde_json::Value = serde_json::from_slice(&body).unwrap();
        prop_assert_eq!(value["edges"].as_array().unwrap().len(), kg.total_multiplicity());
    }
}

#[test]
fn repeated_relation_across_documents_becomes_one_edge() {
    let docs = read_corpus(&common::fixture("corpora/whitepapers.jsonl")).unwrap();
    let kg = build_corpus_graph("whitepapers", &docs, &common::lexicon(), IndexOptions::default()).unwrap();
    let edge = kg
        .edges
        .values()
        .find(|e| e.src.as_str() == "off-chain scaling" && e.dst.as_str() == "decentralized application")
        .unwrap();
    assert_eq!(edge.label, RelationType::UsedFor);
    assert_eq!(edge.multiplicity, 2);
    let docs_seen: Vec<_> = edge.provenance.iter().map(|p| p.doc_key.as_str()).collect();
    assert_eq!(docs_seen.len(), 2);
}

#[test]
fn single_edge_exports_match_golden_files() {
    let docs = read_corpus(&common::fixture("graph/single_edge.jsonl")).unwrap();
    let kg = build_corpus_graph("single_edge", &docs, &common::lexicon(), IndexOptions::default()).unwrap();
    let dot = std::fs::read(common::fixture("graph/single_edge.dot")).unwrap();
    let json = std::fs::read(common::fixture("graph/single_edge.json")).unwrap();
    assert_eq!(export_graph(&kg, ExportFormat::Dot), dot);
    assert_eq!(export_graph(&kg, ExportFormat::CanonicalJson), json);
}

#[test]
fn symmetric_relations_collapse_regardless_of_order() {
    let line = |a: usize, b: usize| {
        format!(
            r#"{{"doc_key":"d{a}","sentences":[["rollups","and","sidechains"]],"ner":[[]],"relations":[[[{a},{a},{b},{b},"CONJUNCTION"]]]}}"#
        )
    };
    let docs = vec![
        spankg::parse_document_line(&line(0, 2)).unwrap(),
        spankg::parse_document_line(&line(2, 0)).unwrap(),
    ];
    let kg = build_corpus_graph("p", &docs, &common::lexicon(), IndexOptions::default()).unwrap();
    assert_eq!(kg.edge_count(), 1);
    let edge = kg.edges.values().next().unwrap();
    assert_eq!(
        (edge.src.as_str(), edge.dst.as_str(), edge.multiplicity),
        ("rollup", "sidechain", 2)
    );
    for ev in &edge.provenance {
        assert_eq!(ev.arg1.start, 0, "evidence follows the oriented endpoints");
    }
    assert!(kg.nodes.values().all(|n| n.dominant_type.is_none()));
}
