//! Scoring predicted documents against gold annotations.
//!
//! Aggregates are micro-averaged: pooled correct counts over pooled
//! predicted counts, not the mean of per-document percentages. A document
//! with nothing predicted scores a vacuous 100%.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::document::{Document, RelationSpan, Span, Violation};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction `{pred}` and gold `{gold}` do not describe the same document")]
    DocMismatch { pred: String, gold: String },
    #[error("no gold document for: {}", .0.join(", "))]
    MissingGold(Vec<String>),
    #[error("no prediction for: {}", .0.join(", "))]
    MissingPred(Vec<String>),
    #[error("duplicate doc_key `{0}`")]
    DuplicateDocKey(String),
    #[error("noun annotation refers to unknown document `{0}`")]
    UnknownDoc(String),
    #[error("noun annotation for `{doc_key}`: {source}")]
    SpanOutOfBounds {
        doc_key: String,
        #[source]
        source: Violation,
    },
    #[error("reading `{path}`: {reason}")]
    Read { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Entities match on span and label; relations on both argument spans,
    /// label, and argument order.
    #[default]
    Strict,
    /// Entities match on span alone; symmetric relations match in either
    /// argument order.
    Lenient,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(MatchMode::Strict),
            "lenient" => Ok(MatchMode::Lenient),
            other => Err(format!("unknown match mode `{other}`")),
        }
    }
}

/// An exact fraction. An empty denominator reads as 1 (vacuous).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        Self { numerator, denominator }
    }

    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            1.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    /// Percentage in tenths of a percent, rounded half up.
    pub fn percent_tenths(&self) -> u64 {
        if self.denominator == 0 {
            return 1000;
        }
        let (n, d) = (self.numerator as u64, self.denominator as u64);
        (2000 * n + d) / (2 * d)
    }

    /// e.g. `73.8%`
    pub fn percent(&self) -> String {
        let t = self.percent_tenths();
        format!("{}.{}%", t / 10, t % 10)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.percent())
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            numerator: usize,
            denominator: usize,
            percent: f64,
        }
        Repr {
            numerator: self.numerator,
            denominator: self.denominator,
            percent: self.percent_tenths() as f64 / 10.0,
        }
        .serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MatchCount {
    /// Predicted items.
    pub total: usize,
    /// Predicted items credited against a gold item.
    pub right: usize,
    /// Gold items, for recall.
    pub gold: usize,
}

impl MatchCount {
    pub fn precision(&self) -> Ratio {
        Ratio::new(self.right, self.total)
    }

    pub fn recall(&self) -> Ratio {
        Ratio::new(self.right, self.gold)
    }
}

fn check_same(pred: &Document, gold: &Document) -> Result<(), EvalError> {
    if pred.doc_key != gold.doc_key || pred.sentences != gold.sentences {
        return Err(EvalError::DocMismatch {
            pred: pred.doc_key.clone(),
            gold: gold.doc_key.clone(),
        });
    }
    Ok(())
}

/// Greedy one-to-one crediting: each prediction, in document order, takes
/// the first unused gold item it matches.
fn credit<P, G>(preds: &[P], golds: &[G], matches: impl Fn(&P, &G) -> bool) -> usize {
    let mut used = vec![false; golds.len()];
    let mut right = 0;
    for p in preds {
        if let Some(i) = (0..golds.len()).find(|&i| !used[i] && matches(p, &golds[i])) {
            used[i] = true;
            right += 1;
        }
    }
    right
}

pub fn match_entities(pred: &Document, gold: &Document, mode: MatchMode) -> Result<MatchCount, EvalError> {
    check_same(pred, gold)?;
    let preds: Vec<_> = pred.entities().map(|(_, e)| *e).collect();
    let golds: Vec<_> = gold.entities().map(|(_, e)| *e).collect();
    let right = credit(&preds, &golds, |p, g| match mode {
        MatchMode::Strict => p == g,
        MatchMode::Lenient => p.span() == g.span(),
    });
    Ok(MatchCount {
        total: preds.len(),
        right,
        gold: golds.len(),
    })
}

fn relation_matches(p: &RelationSpan, g: &RelationSpan, mode: MatchMode) -> bool {
    if p.label != g.label {
        return false;
    }
    let same_order = p.arg1 == g.arg1 && p.arg2 == g.arg2;
    match mode {
        MatchMode::Strict => same_order,
        MatchMode::Lenient => same_order || (p.label.is_symmetric() && p.arg1 == g.arg2 && p.arg2 == g.arg1),
    }
}

pub fn match_relations(pred: &Document, gold: &Document, mode: MatchMode) -> Result<MatchCount, EvalError> {
    check_same(pred, gold)?;
    let preds: Vec<_> = pred.relations().map(|(_, r)| *r).collect();
    let golds: Vec<_> = gold.relations().map(|(_, r)| *r).collect();
    let right = credit(&preds, &golds, |p, g| relation_matches(p, g, mode));
    Ok(MatchCount {
        total: preds.len(),
        right,
        gold: golds.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocScore {
    pub doc_key: String,
    pub entities: MatchCount,
    pub relations: MatchCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: f64,
}

impl Aggregate {
    fn pooled(counts: impl Iterator<Item = MatchCount>) -> Self {
        let sum = counts.fold(MatchCount::default(), |a, c| MatchCount {
            total: a.total + c.total,
            right: a.right + c.right,
            gold: a.gold + c.gold,
        });
        let (p, r) = (sum.precision(), sum.recall());
        let f1 = if p.value() + r.value() == 0.0 {
            0.0
        } else {
            2.0 * p.value() * r.value() / (p.value() + r.value())
        };
        Self {
            precision: p,
            recall: r,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub mode: MatchMode,
    pub per_doc: Vec<DocScore>,
    pub entities: Aggregate,
    pub relations: Aggregate,
}

impl EvaluationReport {
    pub fn entity_micro_precision(&self) -> Ratio {
        self.entities.precision
    }

    pub fn relation_micro_precision(&self) -> Ratio {
        self.relations.precision
    }

    /// Plain-text table followed by the pooled figures.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.per_doc.iter().map(|d| d.doc_key.len()).max().unwrap_or(0).max(8);
        out.push_str(&format!(
            "{:<width$}  {:>8} {:>9} {:>9}  {:>7} {:>10} {:>9}\n",
            "document", "entities", "right ent", "% correct", "relns", "right rels", "% correct"
        ));
        for d in &self.per_doc {
            out.push_str(&format!(
                "{:<width$}  {:>8} {:>9} {:>9}  {:>7} {:>10} {:>9}\n",
                d.doc_key,
                d.entities.total,
                d.entities.right,
                d.entities.precision().percent(),
                d.relations.total,
                d.relations.right,
                d.relations.precision().percent(),
            ));
        }
        out.push_str(&format!(
            "entity micro precision {} ({}/{}), recall {}, f1 {:.3}\n",
            self.entities.precision,
            self.entities.precision.numerator,
            self.entities.precision.denominator,
            self.entities.recall,
            self.entities.f1
        ));
        out.push_str(&format!(
            "relation micro precision {} ({}/{}), recall {}, f1 {:.3}\n",
            self.relations.precision,
            self.relations.precision.numerator,
            self.relations.precision.denominator,
            self.relations.recall,
            self.relations.f1
        ));
        out
    }
}

fn by_key(docs: &[Document]) -> Result<HashMap<&str, &Document>, EvalError> {
    let mut map = HashMap::new();
    for d in docs {
        if map.insert(d.doc_key.as_str(), d).is_some() {
            return Err(EvalError::DuplicateDocKey(d.doc_key.clone()));
        }
    }
    Ok(map)
}

/// Scores every prediction against the gold document with the same key.
/// Per-document rows follow the prediction order.
pub fn evaluate_corpus(preds: &[Document], golds: &[Document], mode: MatchMode) -> Result<EvaluationReport, EvalError> {
    let pred_map = by_key(preds)?;
    let gold_map = by_key(golds)?;
    let missing_gold: BTreeSet<String> = pred_map
        .keys()
        .filter(|k| !gold_map.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing_gold.is_empty() {
        return Err(EvalError::MissingGold(missing_gold.into_iter().collect()));
    }
    let missing_pred: BTreeSet<String> = gold_map
        .keys()
        .filter(|k| !pred_map.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing_pred.is_empty() {
        return Err(EvalError::MissingPred(missing_pred.into_iter().collect()));
    }
    let per_doc = preds
        .iter()
        .map(|p| {
            let g = gold_map[p.doc_key.as_str()];
            Ok(DocScore {
                doc_key: p.doc_key.clone(),
                entities: match_entities(p, g, mode)?,
                relations: match_relations(p, g, mode)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvaluationReport {
        mode,
        entities: Aggregate::pooled(per_doc.iter().map(|d| d.entities)),
        relations: Aggregate::pooled(per_doc.iter().map(|d| d.relations)),
        per_doc,
    })
}

/// Noun spans found by an external part-of-speech tagger for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounAnnotation {
    pub doc_key: String,
    pub sentence_index: usize,
    pub noun_spans: Vec<(usize, usize)>,
}

pub fn load_noun_annotations(path: &Path) -> Result<Vec<NounAnnotation>, EvalError> {
    let read_err = |reason: String| EvalError::Read {
        path: path.display().to_string(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))
}

/// Share of noun spans that overlap at least one predicted entity span.
pub fn noun_overlap(preds: &[Document], nouns: &[NounAnnotation]) -> Result<Ratio, EvalError> {
    let docs = by_key(preds)?;
    let mut hit = 0;
    let mut total = 0;
    let mut entity_cache: HashMap<&str, HashSet<Span>> = HashMap::new();
    for ann in nouns {
        let doc = docs
            .get(ann.doc_key.as_str())
            .ok_or_else(|| EvalError::UnknownDoc(ann.doc_key.clone()))?;
        let layout = doc.layout();
        let out_of_bounds = |source| EvalError::SpanOutOfBounds {
            doc_key: ann.doc_key.clone(),
            source,
        };
        if ann.sentence_index >= doc.sentences.len() {
            return Err(out_of_bounds(Violation::SpanOutOfBounds {
                start: ann.sentence_index,
                end: ann.sentence_index,
                token_count: doc.sentences.len(),
            }));
        }
        let entities = entity_cache
            .entry(doc.doc_key.as_str())
            .or_insert_with(|| doc.entities().map(|(_, e)| e.span()).collect());
        for &(start, end) in &ann.noun_spans {
            let noun = Span::new(start, end);
            layout
                .check_in_sentence(noun, ann.sentence_index)
                .map_err(out_of_bounds)?;
            total += 1;
            if entities.iter().any(|e| e.overlaps(&noun)) {
                hit += 1;
            }
        }
    }
    Ok(Ratio::new(hit, total))
}
