//! Shared inputs for the criterion benchmarks.

use rand::rngs::StdRng;
use rand::SeedableRng;
use spankg::synth::{random_document, SynthParams};
use spankg::Document;

/// A fixed-seed corpus of `docs` documents.
pub fn corpus(docs: usize, seed: u64) -> Vec<Document> {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = SynthParams {
        max_sentences: 12,
        max_tokens: 30,
        max_entities: 6,
        max_relations: 4,
        ..SynthParams::default()
    };
    (0..docs)
        .map(|i| random_document(&mut rng, &format!("bench-{i}"), &params))
        .collect()
}
