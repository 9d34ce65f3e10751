//! Read-only HTTP service over per-corpus analytics snapshots.
//!
//! Every corpus named in the config is loaded once at startup; the index,
//! graph, and documents are then shared immutably between requests. The
//! synthetic corpus id `all` serves every corpus combined, with document
//! keys qualified as `{corpus}/{doc_key}`.
//!
//! Routes:
//!
//! | route | body |
//! |---|---|
//! | `GET /api/corpora` | corpus summaries |
//! | `GET /api/corpora/{id}/entities?limit=N` | most frequent entities |
//! | `GET /api/corpora/{id}/entities/{term}` | one dictionary record with evidence |
//! | `GET /api/corpora/{id}/graph` | canonical-json graph |
//! | `GET /api/corpora/{id}/coverage` | glossary coverage |

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::document::{read_corpus, CorpusError, Document, EntityType, RelationType};
use crate::graph::{build_corpus_graph, export_graph, merge_graphs, ExportFormat, GraphError, KnowledgeGraph};
use crate::index::{coverage_report, frequency_list, CoverageReport, EntityIndex, IndexError, IndexOptions, Side};
use crate::lexicon::{CanonicalTerm, Glossary, Lexicon, LexiconError};

pub const DEFAULT_LIMIT: usize = 100;
pub const ALL_CORPORA: &str = "all";
/// Overrides the configured port.
pub const PORT_ENV: &str = "SPANKG_PORT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("reading config `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("config lists no corpora")]
    NoCorpora,
    #[error("corpus id `{0}` is used more than once")]
    DuplicateCorpus(String),
    #[error("corpus id `{0}` is reserved")]
    ReservedCorpus(String),
    #[error("corpus `{corpus}`: {source}")]
    Corpus {
        corpus: String,
        #[source]
        source: CorpusError,
    },
    #[error("corpus `{corpus}`: {source}")]
    Index {
        corpus: String,
        #[source]
        source: IndexError,
    },
    #[error("corpus `{corpus}`: {source}")]
    Graph {
        corpus: String,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("invalid bind address `{0}`")]
    Bind(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CorpusSpec {
    pub id: String,
    pub path: PathBuf,
}

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_true() -> bool {
    true
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

/// Service configuration, normally read from a TOML file:
///
/// ```toml
/// bind = "127.0.0.1:8080"
/// glossary = "glossary.json"
/// aliases = "aliases.json"
///
/// [[corpus]]
/// id = "whitepapers"
/// path = "whitepapers.jsonl"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(rename = "corpus", default)]
    pub corpora: Vec<CorpusSpec>,
    pub glossary: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub use_aliases: bool,
    #[serde(default)]
    pub exclude_generic: bool,
    #[serde(default = "default_limit")]
    pub default_limit: usize,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    /// Parses a config file; relative paths are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let err = |reason: String| ServiceError::Config {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut config: ServiceConfig = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.corpora.iter_mut().for_each(|c| resolve(&mut c.path));
        config.glossary.as_mut().map(resolve);
        config.aliases.as_mut().map(resolve);
        Ok(config)
    }

    pub fn index_options(&self) -> IndexOptions {
        IndexOptions {
            use_aliases: self.use_aliases,
            exclude_generic: self.exclude_generic,
        }
    }

    /// Bind address after applying the port override from the environment.
    pub fn socket_addr(&self) -> Result<SocketAddr, ServiceError> {
        let mut addr: SocketAddr = self.bind.parse().map_err(|_| ServiceError::Bind(self.bind.clone()))?;
        if let Ok(port) = std::env::var(PORT_ENV) {
            addr.set_port(
                port.parse()
                    .map_err(|_| ServiceError::Bind(format!("{PORT_ENV}={port}")))?,
            );
        }
        Ok(addr)
    }

    pub fn load_lexicon(&self) -> Result<Lexicon, ServiceError> {
        Ok(match &self.glossary {
            Some(g) => Lexicon::load(g, self.aliases.as_deref())?,
            None => Lexicon::default(),
        })
    }
}

/// One corpus, fully analyzed.
#[derive(Debug, Clone)]
pub struct CorpusHandle {
    pub corpus_id: String,
    pub index: EntityIndex,
    pub graph: KnowledgeGraph,
    pub documents: BTreeMap<String, Document>,
}

impl CorpusHandle {
    pub fn build(
        corpus_id: &str,
        docs: Vec<Document>,
        lexicon: &Lexicon,
        options: IndexOptions,
    ) -> Result<Self, ServiceError> {
        let index_err = |source| ServiceError::Index {
            corpus: corpus_id.to_string(),
            source,
        };
        let index = EntityIndex::build(corpus_id, &docs, lexicon, options).map_err(index_err)?;
        let graph = build_corpus_graph(corpus_id, &docs, lexicon, options).map_err(|source| ServiceError::Graph {
            corpus: corpus_id.to_string(),
            source,
        })?;
        Ok(Self {
            corpus_id: corpus_id.to_string(),
            index,
            graph,
            documents: docs.into_iter().map(|d| (d.doc_key.clone(), d)).collect(),
        })
    }
}

/// Loads and analyzes every configured corpus, failing on the first error.
pub fn load_corpora(config: &ServiceConfig, lexicon: &Lexicon) -> Result<Vec<CorpusHandle>, ServiceError> {
    if config.corpora.is_empty() {
        return Err(ServiceError::NoCorpora);
    }
    let mut ids = HashSet::new();
    for spec in &config.corpora {
        if spec.id == ALL_CORPORA {
            return Err(ServiceError::ReservedCorpus(spec.id.clone()));
        }
        if !ids.insert(spec.id.as_str()) {
            return Err(ServiceError::DuplicateCorpus(spec.id.clone()));
        }
    }
    config
        .corpora
        .iter()
        .map(|spec| {
            let docs = read_corpus(&spec.path).map_err(|source| ServiceError::Corpus {
                corpus: spec.id.clone(),
                source,
            })?;
            CorpusHandle::build(&spec.id, docs, lexicon, config.index_options())
        })
        .collect()
}

/// Document key used when corpora are combined, unique across corpora.
pub fn qualified_doc_key(corpus_id: &str, doc_key: &str) -> String {
    format!("{corpus_id}/{doc_key}")
}

/// Combines corpora under [`ALL_CORPORA`]; the graph is the merge of the
/// per-corpus graphs.
pub fn combine_corpora(
    handles: &[CorpusHandle],
    lexicon: &Lexicon,
    options: IndexOptions,
) -> Result<CorpusHandle, ServiceError> {
    let mut graphs = Vec::new();
    let mut all_docs = Vec::new();
    for h in handles {
        let docs: Vec<Document> = h
            .documents
            .values()
            .map(|d| Document {
                doc_key: qualified_doc_key(&h.corpus_id, &d.doc_key),
                ..d.clone()
            })
            .collect();
        let rekeyed = CorpusHandle::build(&h.corpus_id, docs.clone(), lexicon, options)?;
        graphs.push(rekeyed.graph);
        all_docs.extend(docs);
    }
    let mut combined = CorpusHandle::build(ALL_CORPORA, all_docs, lexicon, options)?;
    combined.graph = merge_graphs(graphs);
    Ok(combined)
}

/// A structured error body, `{"error": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    pub fn body(&self) -> Vec<u8> {
        serde_json::to_vec(&serde_json::json!({ "error": self.message })).expect("error body serializes")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, self.body())
    }
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response()
}

#[derive(Serialize)]
struct FrequencyPage<'a> {
    corpus_id: &'a str,
    limit: usize,
    total_entities: usize,
    entities: Vec<(CanonicalTerm, usize)>,
    /// Page entries that are glossary terms.
    glossary_terms: Vec<CanonicalTerm>,
}

/// Body of the entities route and of `freq --json`.
pub fn render_frequency(index: &EntityIndex, glossary: &Glossary, limit: usize) -> Vec<u8> {
    let mut entities = frequency_list(index);
    entities.truncate(limit);
    let glossary_terms = entities
        .iter()
        .filter(|(t, _)| glossary.contains(t.as_str()))
        .map(|(t, _)| t.clone())
        .collect();
    let page = FrequencyPage {
        corpus_id: &index.corpus_id,
        limit,
        total_entities: index.len(),
        entities,
        glossary_terms,
    };
    serde_json::to_vec(&page).expect("frequency page serializes")
}

/// Body of the coverage route; embedded verbatim in `analyze --json`.
pub fn render_coverage(report: &CoverageReport) -> Vec<u8> {
    serde_json::to_vec(report).expect("coverage serializes")
}

#[derive(Debug, Serialize)]
pub struct MentionView {
    pub doc_key: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub sentence: String,
}

#[derive(Debug, Serialize)]
pub struct Evidence {
    pub doc_key: String,
    pub sentence_index: usize,
    pub sentence: String,
}

/// Relation participations grouped by `(label, side, other)`.
#[derive(Debug, Serialize)]
pub struct RelationView {
    pub label: RelationType,
    pub side: Side,
    pub other: CanonicalTerm,
    pub multiplicity: usize,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Serialize)]
pub struct EntityView {
    pub corpus_id: String,
    pub term: CanonicalTerm,
    pub glossary: bool,
    pub dominant_type: Option<EntityType>,
    pub mention_count: usize,
    pub type_counts: BTreeMap<EntityType, usize>,
    pub alias_forms: BTreeSet<String>,
    pub mentions: Vec<MentionView>,
    pub relations: Vec<RelationView>,
}

/// Dictionary record for `term` with sentence text resolved.
pub fn entity_view(handle: &CorpusHandle, lexicon: &Lexicon, use_aliases: bool, term: &str) -> Option<EntityView> {
    let canonical = lexicon.canonicalize(term, use_aliases).ok()?;
    let record = handle.index.get(canonical.as_str())?;
    let sentence = |doc_key: &str, i: usize| {
        handle
            .documents
            .get(doc_key)
            .and_then(|d| d.sentence_text(i))
            .unwrap_or_default()
    };
    let mentions = record
        .mentions
        .iter()
        .map(|m| MentionView {
            doc_key: m.doc_key.clone(),
            sentence_index: m.sentence_index,
            start: m.start,
            end: m.end,
            text: handle
                .documents
                .get(&m.doc_key)
                .and_then(|d| d.resolve_span(m.start, m.end).ok())
                .unwrap_or_default(),
            sentence: sentence(&m.doc_key, m.sentence_index),
        })
        .collect();
    let mut grouped: BTreeMap<(RelationType, Side, CanonicalTerm), Vec<(String, usize)>> = BTreeMap::new();
    for r in &record.relations {
        grouped
            .entry((r.label, r.side, r.other.clone()))
            .or_default()
            .push((r.doc_key.clone(), r.sentence_index));
    }
    let relations = grouped
        .into_iter()
        .map(|((label, side, other), mut refs)| {
            refs.sort();
            RelationView {
                label,
                side,
                other,
                multiplicity: refs.len(),
                evidence: refs
                    .into_iter()
                    .map(|(doc_key, i)| Evidence {
                        sentence: sentence(&doc_key, i),
                        doc_key,
                        sentence_index: i,
                    })
                    .collect(),
            }
        })
        .collect();
    Some(EntityView {
        corpus_id: handle.corpus_id.clone(),
        glossary: lexicon.glossary.contains(record.canonical.as_str()),
        term: record.canonical.clone(),
        dominant_type: record.dominant_type(),
        mention_count: record.mention_count(),
        type_counts: record.type_counts.clone(),
        alias_forms: record.alias_forms.clone(),
        mentions,
        relations,
    })
}

#[derive(Serialize)]
struct CorpusSummary<'a> {
    id: &'a str,
    documents: usize,
    entities: usize,
    mentions: usize,
    relations: usize,
    edges: usize,
}

/// Everything the service answers from; immutable once built.
#[derive(Debug)]
pub struct Snapshot {
    handles: Vec<CorpusHandle>,
    lexicon: Lexicon,
    options: IndexOptions,
    default_limit: usize,
}

impl Snapshot {
    /// Builds a snapshot; an `all` corpus is appended when more than zero corpora load.
    pub fn new(
        handles: Vec<CorpusHandle>,
        lexicon: Lexicon,
        options: IndexOptions,
        default_limit: usize,
    ) -> Result<Self, ServiceError> {
        let mut handles = handles;
        let all = combine_corpora(&handles, &lexicon, options)?;
        handles.push(all);
        Ok(Self {
            handles,
            lexicon,
            options,
            default_limit: default_limit.max(1),
        })
    }

    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let lexicon = config.load_lexicon()?;
        let handles = load_corpora(config, &lexicon)?;
        Self::new(handles, lexicon, config.index_options(), config.default_limit)
    }

    pub fn corpus(&self, id: &str) -> Result<&CorpusHandle, ApiError> {
        self.handles
            .iter()
            .find(|h| h.corpus_id == id)
            .ok_or_else(|| ApiError::not_found(format!("unknown corpus `{id}`")))
    }

    pub fn corpus_ids(&self) -> impl Iterator<Item = &str> {
        self.handles.iter().map(|h| h.corpus_id.as_str())
    }

    pub fn corpora_body(&self) -> Vec<u8> {
        let list: Vec<_> = self
            .handles
            .iter()
            .map(|h| CorpusSummary {
                id: &h.corpus_id,
                documents: h.documents.len(),
                entities: h.index.len(),
                mentions: h.index.total_mentions,
                relations: h.index.total_relations,
                edges: h.graph.edge_count(),
            })
            .collect();
        serde_json::to_vec(&serde_json::json!({
            "default_limit": self.default_limit,
            "corpora": list,
        }))
        .expect("corpus list serializes")
    }

    pub fn entities_body(&self, id: &str, limit: Option<&str>) -> Result<Vec<u8>, ApiError> {
        let handle = self.corpus(id)?;
        let limit = match limit {
            None => self.default_limit,
            Some(raw) => match raw.parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => {
                    return Err(ApiError::bad_request(format!(
                        "limit must be a positive integer, got `{raw}`"
                    )))
                }
            },
        };
        Ok(render_frequency(&handle.index, &self.lexicon.glossary, limit))
    }

    pub fn entity_body(&self, id: &str, term: &str) -> Result<Vec<u8>, ApiError> {
        let handle = self.corpus(id)?;
        let view = entity_view(handle, &self.lexicon, self.options.use_aliases, term)
            .ok_or_else(|| ApiError::not_found(format!("no entity `{term}` in corpus `{id}`")))?;
        Ok(serde_json::to_vec(&view).expect("entity view serializes"))
    }

    pub fn graph_body(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        Ok(export_graph(&self.corpus(id)?.graph, ExportFormat::CanonicalJson))
    }

    pub fn coverage_body(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        let handle = self.corpus(id)?;
        Ok(render_coverage(&coverage_report(&handle.index, &self.lexicon.glossary)))
    }
}

type Shared = State<Arc<Snapshot>>;

fn respond(result: Result<Vec<u8>, ApiError>) -> Response {
    match result {
        Ok(body) => json_response(StatusCode::OK, body),
        Err(e) => e.into_response(),
    }
}

async fn list_corpora(State(s): Shared) -> Response {
    json_response(StatusCode::OK, s.corpora_body())
}

async fn get_entities(
    State(s): Shared,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<BTreeMap<String, String>>,
) -> Response {
    respond(s.entities_body(&id, query.get("limit").map(String::as_str)))
}

async fn get_entity(State(s): Shared, UrlPath((id, term)): UrlPath<(String, String)>) -> Response {
    respond(s.entity_body(&id, &term))
}

async fn get_graph(State(s): Shared, UrlPath(id): UrlPath<String>) -> Response {
    respond(s.graph_body(&id))
}

async fn get_coverage(State(s): Shared, UrlPath(id): UrlPath<String>) -> Response {
    respond(s.coverage_body(&id))
}

async fn fallback() -> Response {
    ApiError::not_found("no such route").into_response()
}

/// Routes with CORS for `cors_origin`, or any origin when `None`.
pub fn router(snapshot: Arc<Snapshot>, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods([Method::GET]);
    Router::new()
        .route("/api/corpora", get(list_corpora))
        .route("/api/corpora/{id}/entities", get(get_entities))
        .route("/api/corpora/{id}/entities/{term}", get(get_entity))
        .route("/api/corpora/{id}/graph", get(get_graph))
        .route("/api/corpora/{id}/coverage", get(get_coverage))
        .fallback(fallback)
        .layer(cors)
        .with_state(snapshot)
}

/// Loads the configured corpora and serves them until the process exits.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let snapshot = Arc::new(Snapshot::load(config)?);
    let addr = config.socket_addr()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, corpora = ?snapshot.corpus_ids().collect::<Vec<_>>(), "serving");
    axum::serve(listener, router(snapshot, config.cors_origin.as_deref())).await?;
    Ok(())
}
