//! Glossary of terms of interest, alias map, and term canonicalization.
//!
//! The glossary file is a JSON array of strings. The alias file is a JSON
//! object mapping each glossary term to the surface forms that should be
//! folded into it (plurals, abbreviations, unhyphenated variants).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("reading `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{path}`: {reason}")]
    Format { path: String, reason: String },
    #[error("alias key `{0}` is not a glossary term")]
    UnknownCanonical(String),
    #[error("alias `{alias}` is listed under `{first}` and `{second}`")]
    DuplicateAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("term is empty after normalization")]
    EmptyTerm,
}

/// A normalized, alias-resolved term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct CanonicalTerm(String);

impl CanonicalTerm {
    /// Normalized term without alias resolution; `None` if nothing remains.
    pub fn new(raw: &str) -> Option<Self> {
        let term = normalize_term(raw);
        (!term.is_empty()).then_some(Self(term))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for CanonicalTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for CanonicalTerm {
    fn borrow(&self) -> &str {
        &self.0
    }
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | '"'
            | '\''
            | '`'
            | '\u{2018}'
            | '\u{2019}'
            | '\u{201c}'
            | '\u{201d}'
            | '\u{00ab}'
            | '\u{00bb}'
            | '\u{2013}'
            | '\u{2014}'
            | '\u{2026}'
    )
}

/// Lowercases, collapses interior whitespace, and trims whitespace and
/// punctuation from both ends. May return an empty string.
pub fn normalize_term(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| c.is_whitespace() || is_edge_punct(c));
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Glossary {
    terms: BTreeSet<String>,
}

impl Glossary {
    /// Normalizes and deduplicates; terms that normalize to nothing are dropped.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            terms: terms
                .into_iter()
                .map(|t| normalize_term(t.as_ref()))
                .filter(|t| !t.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

/// Canonical glossary term to alias forms, with a reverse lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasMap {
    entries: BTreeMap<String, BTreeSet<String>>,
    reverse: BTreeMap<String, String>,
}

impl AliasMap {
    /// Builds a validated map. Keys and aliases are normalized first.
    pub fn new<K, A, V>(entries: impl IntoIterator<Item = (K, V)>, glossary: &Glossary) -> Result<Self, LexiconError>
    where
        K: AsRef<str>,
        A: AsRef<str>,
        V: IntoIterator<Item = A>,
    {
        let mut map = AliasMap::default();
        for (key, aliases) in entries {
            let canonical = normalize_term(key.as_ref());
            if !glossary.contains(&canonical) {
                return Err(LexiconError::UnknownCanonical(key.as_ref().to_string()));
            }
            for alias in aliases {
                let alias = normalize_term(alias.as_ref());
                if alias.is_empty() {
                    return Err(LexiconError::EmptyTerm);
                }
                if glossary.contains(&alias) {
                    return Err(LexiconError::DuplicateAlias {
                        alias: alias.clone(),
                        first: alias,
                        second: canonical,
                    });
                }
                match map.reverse.get(&alias) {
                    Some(existing) if *existing != canonical => {
                        return Err(LexiconError::DuplicateAlias {
                            alias,
                            first: existing.clone(),
                            second: canonical,
                        });
                    }
                    _ => {}
                }
                map.reverse.insert(alias.clone(), canonical.clone());
                map.entries.entry(canonical.clone()).or_default().insert(alias);
            }
            map.entries.entry(canonical).or_default();
        }
        Ok(map)
    }

    pub fn canonical_of(&self, alias: &str) -> Option<&str> {
        self.reverse.get(alias).map(String::as_str)
    }

    pub fn aliases_of(&self, canonical: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(canonical)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Glossary and aliases, immutable after load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub glossary: Glossary,
    pub aliases: AliasMap,
}

impl Lexicon {
    pub fn new(glossary: Glossary, aliases: AliasMap) -> Self {
        Self { glossary, aliases }
    }

    /// Loads a glossary and an optional alias file.
    pub fn load(glossary: &Path, aliases: Option<&Path>) -> Result<Self, LexiconError> {
        let glossary = load_glossary(glossary)?;
        let aliases = match aliases {
            Some(path) => load_aliases(path, &glossary)?,
            None => AliasMap::default(),
        };
        Ok(Self { glossary, aliases })
    }

    pub fn canonicalize(&self, term: &str, use_aliases: bool) -> Result<CanonicalTerm, LexiconError> {
        canonicalize(term, self, use_aliases)
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, LexiconError> {
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| LexiconError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_glossary(path: &Path) -> Result<Glossary, LexiconError> {
    let format_err = |reason: &str| LexiconError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let raw: Vec<String> =
        serde_json::from_value(read_json(path)?).map_err(|_| format_err("expected an array of strings"))?;
    if raw.is_empty() {
        return Err(format_err("glossary is empty"));
    }
    let mut terms = BTreeSet::new();
    for entry in &raw {
        let term = normalize_term(entry);
        if term.is_empty() {
            return Err(format_err(&format!("entry `{entry}` is empty after normalization")));
        }
        if !terms.insert(term.clone()) {
            tracing::warn!(path = %path.display(), entry = %entry, "duplicate glossary term `{term}` merged");
        }
    }
    Ok(Glossary { terms })
}

pub fn load_aliases(path: &Path, glossary: &Glossary) -> Result<AliasMap, LexiconError> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_value(read_json(path)?).map_err(|_| LexiconError::Format {
            path: path.display().to_string(),
            reason: "expected an object of string arrays".to_string(),
        })?;
    AliasMap::new(raw, glossary)
}

/// Maps a surface term to the identity it is aggregated under.
pub fn canonicalize(term: &str, lexicon: &Lexicon, use_aliases: bool) -> Result<CanonicalTerm, LexiconError> {
    let normalized = normalize_term(term);
    if normalized.is_empty() {
        return Err(LexiconError::EmptyTerm);
    }
    if use_aliases {
        if let Some(canonical) = lexicon.aliases.canonical_of(&normalized) {
            return Ok(CanonicalTerm(canonical.to_string()));
        }
    }
    Ok(CanonicalTerm(normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn lexicon() -> Lexicon {
        let glossary = Glossary::from_terms(["smart-contract", "decentralized application", "blockchain"]);
        let aliases = AliasMap::new(
            [
                ("smart-contract", vec!["smart contract", "smart contracts"]),
                ("decentralized application", vec!["dapps", "decentralized app"]),
            ],
            &glossary,
        )
        .unwrap();
        Lexicon::new(glossary, aliases)
    }

    fn temp_json(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn normalizes() {
        assert_eq!(normalize_term("Smart  Contracts"), "smart contracts");
        assert_eq!(normalize_term("blockchain"), "blockchain");
        assert_eq!(normalize_term("\u{201c}dApps\u{201d}"), "dapps");
        assert_eq!(normalize_term("..."), "");
    }

    #[test]
    fn normalizes_hand_checked_forms() {
        // Expected values written out by hand.
        let cases = [
            ("Blockchain", "blockchain"),
            ("  Proof-of-Stake ", "proof-of-stake"),
            ("(Layer 2)", "layer 2"),
            ("DeFi,", "defi"),
            ("\"Oracles\"", "oracles"),
            ("Zero-Knowledge\tProofs", "zero-knowledge proofs"),
            ("smart-contract.", "smart-contract"),
            ("'NFTs'", "nfts"),
            ("Gas  Fees;", "gas fees"),
            ("[DAO]", "dao"),
            ("C++", "c++"),
            ("ERC-20", "erc-20"),
            ("v2.0", "v2.0"),
            ("Uniswap\u{2019}", "uniswap"),
            ("\u{2014}rollups\u{2014}", "rollups"),
            ("Cross-Chain  Bridge", "cross-chain bridge"),
            ("e.g.", "e.g"),
            ("Ethereum Virtual Machine (", "ethereum virtual machine"),
            ("  ", ""),
            ("\u{00ab}Staking\u{00bb}", "staking"),
        ];
        for (raw, want) in cases {
            assert_eq!(normalize_term(raw), want, "{raw:?}");
        }
    }

    #[test]
    fn loads_glossary() {
        let f = temp_json(r#"["Smart-Contract","blockchain","Blockchain"]"#);
        let g = load_glossary(f.path()).unwrap();
        assert_eq!(g.iter().collect::<Vec<_>>(), vec!["blockchain", "smart-contract"]);
        let empty = temp_json("[]");
        assert!(matches!(load_glossary(empty.path()), Err(LexiconError::Format { .. })));
        let wrong = temp_json(r#"{"a":1}"#);
        assert!(matches!(load_glossary(wrong.path()), Err(LexiconError::Format { .. })));
        assert!(matches!(
            load_glossary(Path::new("/nonexistent/glossary.json")),
            Err(LexiconError::Io { .. })
        ));
    }

    #[test]
    fn loads_aliases() {
        let g = Glossary::from_terms(["smart-contract", "a", "b"]);
        let f = temp_json(r#"{"smart-contract":["smart contract","smart contracts"]}"#);
        let map = load_aliases(f.path(), &g).unwrap();
        assert_eq!(map.canonical_of("smart contracts"), Some("smart-contract"));
        assert_eq!(map.aliases_of("smart-contract").unwrap().len(), 2);

        let unknown = temp_json(r#"{"unlisted-term":["x"]}"#);
        assert!(matches!(
            load_aliases(unknown.path(), &g),
            Err(LexiconError::UnknownCanonical(_))
        ));
        let dup = temp_json(r#"{"a":["z"],"b":["z"]}"#);
        assert!(matches!(
            load_aliases(dup.path(), &g),
            Err(LexiconError::DuplicateAlias { .. })
        ));
        let collide = temp_json(r#"{"a":["B"]}"#);
        assert!(matches!(
            load_aliases(collide.path(), &g),
            Err(LexiconError::DuplicateAlias { .. })
        ));
    }

    #[test]
    fn canonicalizes() {
        let lex = lexicon();
        assert_eq!(
            canonicalize("smart contracts", &lex, true).unwrap().as_str(),
            "smart-contract"
        );
        assert_eq!(
            canonicalize("smart contracts", &lex, false).unwrap().as_str(),
            "smart contracts"
        );
        assert_eq!(
            canonicalize("dApps", &lex, true).unwrap().as_str(),
            "decentralized application"
        );
        assert!(matches!(canonicalize(" , ", &lex, true), Err(LexiconError::EmptyTerm)));
    }

    proptest! {
        #[test]
        fn normalize_idempotent(s in "\\PC{0,24}") {
            let once = normalize_term(&s);
            prop_assert_eq!(normalize_term(&once), once);
        }

        #[test]
        fn canonicalize_idempotent_and_alias_free(
            s in prop::sample::select(vec![
                "Smart Contracts", "dApps", "DAPPS.", "blockchain", "Decentralized App",
                "off-chain scaling", "smart-contract", "layer 2",
            ]),
            use_aliases in any::<bool>(),
        ) {
            let lex = lexicon();
            let once = canonicalize(s, &lex, use_aliases).unwrap();
            let twice = canonicalize(once.as_str(), &lex, use_aliases).unwrap();
            prop_assert_eq!(&twice, &once);
            if use_aliases {
                prop_assert!(lex.aliases.canonical_of(once.as_str()).is_none());
            }
        }
    }
}
