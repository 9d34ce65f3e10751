//! Seeded random corpora for property tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::document::{Document, EntitySpan, EntityType, RelationSpan, RelationType, Span};
use crate::lexicon::{AliasMap, Glossary, Lexicon};

/// Vocabulary drawn on for tokens. Several entries are aliases of each other
/// under [`lexicon`], so alias folding changes record counts.
pub const WORDS: &[&str] = &[
    "blockchain",
    "Blockchain",
    "smart",
    "contract",
    "contracts",
    "smart-contract",
    "dApps",
    "dapp",
    "token",
    "tokens",
    "oracle",
    "Oracles",
    "ledger",
    "staking",
    "rollup",
    "rollups",
    "bridge",
    "the",
    "of",
    "for",
    "off-chain",
    "scaling",
    "DeFi",
    "AMM",
    "liquidity",
    "pool",
];

/// Glossary and aliases that match [`WORDS`].
pub fn lexicon() -> Lexicon {
    let glossary = Glossary::from_terms([
        "blockchain",
        "smart-contract",
        "decentralized application",
        "token",
        "oracle",
        "rollup",
        "decentralized finance",
        "automated market maker",
        "liquidity pool",
    ]);
    let aliases = AliasMap::new(
        [
            (
                "smart-contract",
                vec!["smart contract", "smart contracts", "contract", "contracts"],
            ),
            ("decentralized application", vec!["dapps", "dapp"]),
            ("token", vec!["tokens"]),
            ("oracle", vec!["oracles"]),
            ("rollup", vec!["rollups"]),
            ("decentralized finance", vec!["defi"]),
            ("automated market maker", vec!["amm"]),
            ("liquidity pool", vec!["pool"]),
        ],
        &glossary,
    )
    .expect("synthetic lexicon is consistent");
    Lexicon::new(glossary, aliases)
}

#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub max_docs: usize,
    pub max_sentences: usize,
    pub max_tokens: usize,
    pub max_entities: usize,
    pub max_relations: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            max_docs: 10,
            max_sentences: 8,
            max_tokens: 12,
            max_entities: 4,
            max_relations: 3,
        }
    }
}

fn random_span<R: Rng>(rng: &mut R, offset: usize, len: usize) -> Span {
    let start = rng.random_range(0..len);
    let end = rng.random_range(start..len.min(start + 3));
    Span::new(offset + start, offset + end)
}

/// A valid document with random tokens, entity spans and relations.
pub fn random_document<R: Rng>(rng: &mut R, doc_key: &str, params: &SynthParams) -> Document {
    let n_sentences = rng.random_range(1..=params.max_sentences.max(1));
    let mut doc = Document {
        doc_key: doc_key.to_string(),
        dataset: rng.random_bool(0.5).then(|| "scierc".to_string()),
        sentences: Vec::with_capacity(n_sentences),
        ner: Vec::with_capacity(n_sentences),
        relations: Vec::with_capacity(n_sentences),
        clusters: None,
    };
    let mut offset = 0;
    for _ in 0..n_sentences {
        let len = rng.random_range(1..=params.max_tokens.max(1));
        doc.sentences
            .push((0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect());
        let ner = (0..rng.random_range(0..=params.max_entities))
            .map(|_| {
                let span = random_span(rng, offset, len);
                EntitySpan {
                    start: span.start,
                    end: span.end,
                    label: *EntityType::ALL.choose(rng).unwrap(),
                }
            })
            .collect();
        let relations = (0..rng.random_range(0..=params.max_relations))
            .map(|_| RelationSpan {
                arg1: random_span(rng, offset, len),
                arg2: random_span(rng, offset, len),
                label: *RelationType::ALL.choose(rng).unwrap(),
            })
            .collect();
        doc.ner.push(ner);
        doc.relations.push(relations);
        offset += len;
    }
    if rng.random_bool(0.3) {
        let clusters = (0..rng.random_range(1..3))
            .map(|_| {
                let s = rng.random_range(0..n_sentences);
                let start = doc.layout().sentence_range(s).start;
                vec![random_span(rng, start, doc.sentences[s].len())]
            })
            .collect();
        doc.clusters = Some(clusters);
    }
    doc
}

/// Between zero and `max_docs` documents with unique keys.
pub fn random_corpus<R: Rng>(rng: &mut R, params: &SynthParams) -> Vec<Document> {
    let n = rng.random_range(0..=params.max_docs);
    (0..n)
        .map(|i| random_document(rng, &format!("doc-{i}"), params))
        .collect()
}
