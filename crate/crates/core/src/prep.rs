//! Corpus preparation: turn raw text files into annotation-empty documents.
//!
//! Raw whitepaper/article text usually arrives hard-wrapped, and span models
//! produce much worse output when sentences are broken across lines. The
//! default pipeline therefore joins lines before segmenting.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::document::Document;

/// Characters split off the edges of a whitespace-delimited chunk.
const DETACHABLE: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '"', '\''];

/// Characters allowed between a sentence terminator and the following space.
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("document `{doc_id}` contains no tokens")]
    EmptyDocument { doc_id: String },
    #[error("document id is empty")]
    EmptyDocId,
    #[error("`{path}` is not valid UTF-8")]
    InvalidUtf8 { path: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("reading `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A raw input text, keyed by its document id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawText {
    pub doc_id: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatOptions {
    /// Join hard-wrapped lines before sentence splitting.
    pub strip_line_breaks: bool,
    /// Value written to the `dataset` field of every document.
    pub dataset: Option<String>,
}

impl Default for FormatOptions {
    fn default() -> Self {
        Self {
            strip_line_breaks: true,
            dataset: None,
        }
    }
}

fn is_line_break(c: char) -> bool {
    c == '\n' || c == '\r'
}

/// Replaces every whitespace run that contains a line break with a single
/// space and trims the result.
pub fn strip_line_breaks(content: &str) -> String {
    let mut out = String::with_capacity(content.len());
    let mut chars = content.chars().peekable();
    while let Some(c) = chars.next() {
        if !c.is_whitespace() {
            out.push(c);
            continue;
        }
        let mut run = String::new();
        run.push(c);
        while let Some(&next) = chars.peek() {
            if !next.is_whitespace() {
                break;
            }
            run.push(next);
            chars.next();
        }
        if run.chars().any(is_line_break) {
            out.push(' ');
        } else {
            out.push_str(&run);
        }
    }
    out.trim().to_string()
}

/// Rule-based sentence segmentation.
///
/// A boundary is placed after `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next character is whitespace and the first
/// non-whitespace character after it is an uppercase letter or a digit.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || CLOSERS.contains(&chars[j].1)) {
                j += 1;
            }
            if j < chars.len() && chars[j].1.is_whitespace() {
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                if k < chars.len() && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit()) {
                    let end = chars[j].0;
                    push_trimmed(&mut sentences, &text[start..end]);
                    start = chars[k].0;
                    i = k;
                    continue;
                }
            }
            i = j;
            continue;
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Whitespace tokenization with edge punctuation detached into separate
/// tokens. Interior hyphens and periods stay inside their token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in sentence.split_whitespace() {
        let leading: Vec<char> = chunk.chars().take_while(|c| DETACHABLE.contains(c)).collect();
        let rest = &chunk[leading.iter().map(|c| c.len_utf8()).sum::<usize>()..];
        let core = rest.trim_end_matches(DETACHABLE);
        let trailing = &rest[core.len()..];
        tokens.extend(leading.iter().map(|c| c.to_string()));
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        tokens.extend(trailing.chars().map(|c| c.to_string()));
    }
    tokens
}

/// Builds a model-ready document with default options.
pub fn format_document(doc_id: &str, content: &str) -> Result<Document, PrepError> {
    format_document_with(doc_id, content, &FormatOptions::default())
}

pub fn format_document_with(doc_id: &str, content: &str, options: &FormatOptions) -> Result<Document, PrepError> {
    if doc_id.is_empty() {
        return Err(PrepError::EmptyDocId);
    }
    // Without stripping, line breaks act as hard sentence boundaries.
    let segments: Vec<String> = if options.strip_line_breaks {
        vec![strip_line_breaks(content)]
    } else {
        content.split(is_line_break).map(str::to_string).collect()
    };
    let sentences: Vec<Vec<String>> = segments
        .iter()
        .flat_map(|segment| split_sentences(segment))
        .map(|sentence| tokenize(&sentence))
        .filter(|tokens| !tokens.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(PrepError::EmptyDocument {
            doc_id: doc_id.to_string(),
        });
    }
    let n = sentences.len();
    Ok(Document {
        doc_key: doc_id.to_string(),
        dataset: options.dataset.clone(),
        sentences,
        ner: vec![Vec::new(); n],
        relations: vec![Vec::new(); n],
        clusters: None,
    })
}

/// Reads every `.txt` file in `dir` (non-recursive), ordered by document id.
pub fn read_text_dir(dir: &Path) -> Result<Vec<RawText>, PrepError> {
    let io_err = |path: &Path, source| PrepError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut texts = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if !path.is_file() || path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if doc_id.is_empty() {
            return Err(PrepError::EmptyDocId);
        }
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let content = String::from_utf8(bytes).map_err(|_| PrepError::InvalidUtf8 {
            path: path.display().to_string(),
        })?;
        texts.push(RawText { doc_id, content });
    }
    texts.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if let Some(pair) = texts.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(PrepError::DuplicateDocId(pair[0].doc_id.clone()));
    }
    Ok(texts)
}

/// Formats a whole directory of text files.
pub fn format_dir(dir: &Path, options: &FormatOptions) -> Result<Vec<Document>, PrepError> {
    read_text_dir(dir)?
        .iter()
        .map(|raw| format_document_with(&raw.doc_id, &raw.content, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_breaks() {
        assert_eq!(strip_line_breaks("a\nb"), "a b");
        assert_eq!(strip_line_breaks("a\r\n\r\n  b "), "a b");
        assert_eq!(strip_line_breaks(""), "");
        assert_eq!(strip_line_breaks("a  b\rc"), "a  b c");
    }

    #[test]
    fn splits_sentences() {
        assert_eq!(split_sentences("A b. C d."), vec!["A b.", "C d."]);
        assert_eq!(split_sentences("v2.0 is out."), vec!["v2.0 is out."]);
        assert_eq!(split_sentences("Hi"), vec!["Hi"]);
        assert_eq!(
            split_sentences("It works! 42 nodes agree."),
            vec!["It works!", "42 nodes agree."]
        );
        assert_eq!(split_sentences("See e.g. the docs."), vec!["See e.g. the docs."]);
        assert_eq!(
            split_sentences("He said \"no.\" Then left."),
            vec!["He said \"no.\"", "Then left."]
        );
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn tokenizes() {
        assert_eq!(tokenize("smart contracts."), vec!["smart", "contracts", "."]);
        assert_eq!(tokenize("(off-chain)"), vec!["(", "off-chain", ")"]);
        assert_eq!(tokenize("a"), vec!["a"]);
        assert_eq!(tokenize("v2.0, e.g."), vec!["v2.0", ",", "e.g", "."]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn formats_document() {
        let doc = format_document("d1", "A b. C.").unwrap();
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.ner, vec![Vec::new(), Vec::new()]);
        assert_eq!(doc.relations, vec![Vec::new(), Vec::new()]);
        assert!(doc.clusters.is_none());
        assert!(doc.validate().is_empty());
        assert!(matches!(
            format_document("d2", ""),
            Err(PrepError::EmptyDocument { .. })
        ));
        assert!(matches!(
            format_document("d3", " \n\r\n "),
            Err(PrepError::EmptyDocument { .. })
        ));
    }

    #[test]
    fn keep_line_breaks_splits_on_lines() {
        let opts = FormatOptions {
            strip_line_breaks: false,
            dataset: Some("scierc".into()),
        };
        let doc = format_document_with("d", "The smart\ncontract runs.", &opts).unwrap();
        assert_eq!(doc.sentences, vec![vec!["The", "smart"], vec!["contract", "runs", "."]]);
        assert_eq!(doc.dataset.as_deref(), Some("scierc"));
        let joined = format_document("d", "The smart\ncontract runs.").unwrap();
        assert_eq!(joined.sentences.len(), 1);
    }

    proptest! {
        #[test]
        fn strip_is_idempotent(s in "[a-c \\r\\n\\t.]{0,40}") {
            let once = strip_line_breaks(&s);
            prop_assert!(!once.contains('\n') && !once.contains('\r'));
            prop_assert_eq!(strip_line_breaks(&once), once);
        }

        #[test]
        fn tokens_cover_input(s in "[a-zA-Z0-9 .,;:!?()\\[\\]\"'-]{1,40}") {
            let tokens = tokenize(&s);
            prop_assert!(tokens.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
            let squashed: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(tokens.concat(), squashed.clone());
            prop_assert_eq!(tokens.is_empty(), squashed.is_empty());
        }

        #[test]
        fn sentences_reassemble(s in "[a-zA-Z0-9 .!?]{0,60}") {
            let s = strip_line_breaks(&s);
            let sentences = split_sentences(&s);
            prop_assert!(sentences.iter().all(|x| !x.is_empty()));
            let squash = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(squash(&sentences.join(" ")), squash(&s));
        }
    }
}
