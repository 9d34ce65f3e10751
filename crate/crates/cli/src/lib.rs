//! Argument handling and subcommands for the `spankg` binary.
//!
//! Everything runs through [`run`] so tests can drive the CLI in-process and
//! inspect stdout, stderr and the exit code.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spankg::api::{self, render_coverage, render_frequency, ServiceConfig};
use spankg::document::{parse_record, write_corpus};
use spankg::eval::load_noun_annotations;
use spankg::graph::{export_graph_with, ExportOptions};
use spankg::prep::{format_dir, FormatOptions};
use spankg::{
    build_corpus_graph, build_entity_index, coverage_report, evaluate_corpus, frequency_list, merge_graphs,
    noun_overlap, read_corpus, Document, ExportFormat, IndexOptions, Lexicon, MatchMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spankg",
    version,
    about = "Entity dictionaries and knowledge graphs from span-based IE output"
)]
struct Cli {
    /// Machine-readable output where the subcommand supports it.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LexiconArgs {
    /// JSON array of canonical terms.
    #[arg(long)]
    glossary: Option<PathBuf>,
    /// JSON object mapping canonical terms to alias lists.
    #[arg(long, requires = "glossary")]
    aliases: Option<PathBuf>,
    /// Aggregate surface forms without alias folding.
    #[arg(long)]
    no_aliases: bool,
    /// Drop Generic mentions and the relations touching them.
    #[arg(long)]
    exclude_generic: bool,
}

impl LexiconArgs {
    fn load(&self) -> Result<Lexicon, Failure> {
        match &self.glossary {
            Some(g) => Lexicon::load(g, self.aliases.as_deref()).map_err(Failure::data),
            None => Ok(Lexicon::default()),
        }
    }

    fn options(&self) -> IndexOptions {
        IndexOptions {
            use_aliases: !self.no_aliases,
            exclude_generic: self.exclude_generic,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a directory of .txt files into jsonl documents.
    Format {
        dir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Treat every line break as a sentence boundary.
        #[arg(long)]
        keep_line_breaks: bool,
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Check every record of a jsonl file and list the problems found.
    Validate { input: PathBuf },
    /// Entity frequency list of one corpus.
    Freq {
        input: PathBuf,
        #[arg(long, default_value_t = api::DEFAULT_LIMIT)]
        limit: usize,
        #[arg(long)]
        corpus_id: Option<String>,
        #[command(flatten)]
        lexicon: LexiconArgs,
    },
    /// Glossary coverage of one or more corpora.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        lexicon: LexiconArgs,
    },
    /// Build and export the merged knowledge graph.
    Graph {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "canonical-json")]
        format: String,
        /// One edge per occurrence instead of one per (src, dst, label).
        #[arg(long)]
        keep_duplicates: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        lexicon: LexiconArgs,
    },
    /// Score predictions against gold annotations.
    Eval {
        pred: PathBuf,
        gold: PathBuf,
        /// Ignore entity labels and the order of symmetric relations.
        #[arg(long)]
        lenient: bool,
    },
    /// Share of tagged nouns covered by a predicted entity.
    NounsEval { pred: PathBuf, nouns: PathBuf },
    /// Serve the configured corpora over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the port of the configured bind address.
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn data(e: impl Display) -> Self {
        Failure::Data(e.to_string())
    }

    fn usage(e: impl Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let json = cli.json;
    match cli.command {
        Command::Format {
            dir,
            output,
            keep_line_breaks,
            dataset,
        } => {
            let options = FormatOptions {
                strip_line_breaks: !keep_line_breaks,
                dataset,
            };
            let docs = format_dir(&dir, &options).map_err(Failure::data)?;
            emit(out, output.as_deref(), write_corpus(&docs).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Validate { input } => validate(&input, json, out),
        Command::Freq {
            input,
            limit,
            corpus_id,
            lexicon,
        } => {
            if limit == 0 {
                return Err(Failure::usage("--limit must be at least 1"));
            }
            let lex = lexicon.load()?;
            let docs = load(&input)?;
            let id = corpus_id.unwrap_or_else(|| corpus_id_of(&input));
            let index = build_entity_index(&id, &docs, &lex, lexicon.options()).map_err(Failure::data)?;
            if json {
                let mut body = render_frequency(&index, &lex.glossary, limit);
                body.push(b'\n');
                write(out, &body)?;
            } else {
                let mut text = String::new();
                for (term, count) in frequency_list(&index).into_iter().take(limit) {
                    text.push_str(&format!("{count}\t{term}\n"));
                }
                write(out, text.as_bytes())?;
            }
            Ok(EXIT_OK)
        }
        Command::Analyze { inputs, top, lexicon } => {
            if lexicon.glossary.is_none() {
                return Err(Failure::usage("analyze needs --glossary"));
            }
            let lex = lexicon.load()?;
            let mut text = String::new();
            let mut parts = Vec::new();
            for input in &inputs {
                let id = corpus_id_of(input);
                let index = build_entity_index(&id, &load(input)?, &lex, lexicon.options()).map_err(Failure::data)?;
                let report = coverage_report(&index, &lex.glossary);
                let top_terms: Vec<_> = frequency_list(&index).into_iter().take(top).collect();
                if json {
                    let coverage = String::from_utf8(render_coverage(&report)).expect("json is utf-8");
                    parts.push(format!(
                        "{{\"corpus_id\":{},\"coverage\":{},\"top\":{}}}",
                        serde_json::to_string(&id).expect("string serializes"),
                        coverage,
                        serde_json::to_string(&top_terms).expect("terms serialize"),
                    ));
                } else {
                    text.push_str(&format!(
                        "{id}: {}, {} rels\n",
                        report.summary(),
                        report.glossary_relation_count
                    ));
                    for (term, count) in &top_terms {
                        text.push_str(&format!("  {count}\t{term}\n"));
                    }
                }
            }
            if json {
                text = format!(
                    "{{\"use_aliases\":{},\"corpora\":[{}]}}\n",
                    !lexicon.no_aliases,
                    parts.join(",")
                );
            }
            write(out, text.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Graph {
            inputs,
            format,
            keep_duplicates,
            output,
            lexicon,
        } => {
            let format: ExportFormat = format.parse().map_err(Failure::usage)?;
            let lex = lexicon.load()?;
            // Several inputs are keyed like the service's combined corpus.
            let qualify = inputs.len() > 1;
            let mut graphs = Vec::new();
            for input in &inputs {
                let id = corpus_id_of(input);
                let mut docs = load(input)?;
                if qualify {
                    docs.iter_mut()
                        .for_each(|d| d.doc_key = api::qualified_doc_key(&id, &d.doc_key));
                }
                graphs.push(build_corpus_graph(&id, &docs, &lex, lexicon.options()).map_err(Failure::data)?);
            }
            let graph = merge_graphs(graphs);
            let body = export_graph_with(&graph, format, ExportOptions { keep_duplicates });
            emit(out, output.as_deref(), &body)?;
            Ok(EXIT_OK)
        }
        Command::Eval { pred, gold, lenient } => {
            let mode = if lenient { MatchMode::Lenient } else { MatchMode::Strict };
            let report = evaluate_corpus(&load(&pred)?, &load(&gold)?, mode).map_err(Failure::data)?;
            if json {
                let mut body = serde_json::to_vec(&report).expect("report serializes");
                body.push(b'\n');
                write(out, &body)?;
            } else {
                write(out, report.to_table().as_bytes())?;
            }
            Ok(EXIT_OK)
        }
        Command::NounsEval { pred, nouns } => {
            let annotations = load_noun_annotations(&nouns).map_err(Failure::data)?;
            let ratio = noun_overlap(&load(&pred)?, &annotations).map_err(Failure::data)?;
            let line = if json {
                format!("{}\n", serde_json::to_string(&ratio).expect("ratio serializes"))
            } else {
                format!(
                    "{} of {} nouns overlap a predicted entity ({})\n",
                    ratio.numerator, ratio.denominator, ratio
                )
            };
            write(out, line.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Serve { config, port } => {
            let mut config = ServiceConfig::from_file(&config).map_err(Failure::data)?;
            if let Some(port) = port {
                let mut addr = config.socket_addr().map_err(Failure::data)?;
                addr.set_port(port);
                config.bind = addr.to_string();
            }
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .with_writer(std::io::stderr)
                .try_init();
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::data)?;
            runtime.block_on(api::serve(&config)).map_err(Failure::data)?;
            Ok(EXIT_OK)
        }
    }
}

/// Every problem in the file, not just the first.
fn validate(input: &Path, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
    let mut problems = Vec::new();
    let mut records = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        match parse_record(line) {
            Err(e) => problems.push((i + 1, None, e.to_string())),
            Ok(doc) => {
                for v in doc.validate() {
                    problems.push((i + 1, Some(doc.doc_key.clone()), v.to_string()));
                }
            }
        }
    }
    let mut report = String::new();
    if json {
        let list: Vec<_> = problems
            .iter()
            .map(|(line, key, msg)| serde_json::json!({"line": line, "doc_key": key, "problem": msg}))
            .collect();
        report.push_str(&serde_json::json!({"records": records, "problems": list}).to_string());
        report.push('\n');
    } else {
        for (line, key, msg) in &problems {
            match key {
                Some(k) => report.push_str(&format!("{}:{line}: {k}: {msg}\n", input.display())),
                None => report.push_str(&format!("{}:{line}: {msg}\n", input.display())),
            }
        }
        report.push_str(&format!("{records} records, {} problems\n", problems.len()));
    }
    write(out, report.as_bytes())?;
    Ok(if problems.is_empty() { EXIT_OK } else { EXIT_DATA })
}

fn load(path: &Path) -> Result<Vec<Document>, Failure> {
    read_corpus(path).map_err(Failure::data)
}

/// File stem, the same id the service uses when the config names it so.
fn corpus_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write(out: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    out.write_all(bytes).map_err(Failure::data)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => write(out, bytes),
    }
}
