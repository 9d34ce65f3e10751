#![allow(dead_code)]

use std::path::PathBuf;

use spankg::Lexicon;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn lexicon() -> Lexicon {
    Lexicon::load(
        &fixture("lexicon/glossary.json"),
        Some(&fixture("lexicon/aliases.json")),
    )
    .unwrap()
}
