//! Operator commands behind the `litdex` binary.
//!
//! Exit codes: 0 success, 1 user or input error, 2 internal error.

mod granularity;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use granularity::{
    compare_granularity, full_text_length, jaccard, parse_queries, GranularityReport, Overlap, PerScheme,
    QueryComparison,
};

use crate::corpus::{parse_corpus, GranularityScheme};
use crate::highlight::{EmbeddingProvider, ExternalEncoderConfig};
use crate::index::{build_from_articles, load_index, save_index, IndexConfig, DEFAULT_B, DEFAULT_K1};
use crate::rerank::{ExternalScorerConfig, ScorerKind};
use crate::service::{
    serve, Engine, EngineSettings, RequestDefaults, SearchRequest, SearchResponse, ServeError,
    ServiceConfig, DEFAULT_K_FIRST_STAGE, DEFAULT_MAX_RESULTS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "litdex", version, about = "Multi-stage search over scientific article corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist an index from a JSONL corpus.
    Build(BuildArgs),
    /// Run one query against a persisted index.
    Search(SearchArgs),
    /// Compare abstract, full-text and paragraph indexing on a query set.
    CompareGranularity(CompareArgs),
    /// Run the HTTP search service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// abstract | fulltext | paragraph
    #[arg(long, default_value = "paragraph")]
    pub scheme: GranularityScheme,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K1)]
    pub k1: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    pub query: String,
    /// Rerank candidates with span scoring.
    #[arg(long)]
    pub rerank: bool,
    /// Print the response JSON (same shape as /api/search).
    #[arg(long)]
    pub json: bool,
    /// First-stage candidate depth.
    #[arg(long, default_value_t = DEFAULT_K_FIRST_STAGE)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_RESULTS)]
    pub max_results: usize,
    #[arg(long)]
    pub year_from: Option<i32>,
    #[arg(long)]
    pub year_to: Option<i32>,
    #[arg(long)]
    pub journal: Vec<String>,
    #[arg(long)]
    pub source: Vec<String>,
    #[arg(long)]
    pub author: Vec<String>,
    /// Base URL of an external relevance scorer; lexical scoring otherwise.
    #[arg(long)]
    pub scorer_endpoint: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub scorer_timeout_ms: u64,
    /// Base URL of an external token encoder; hash n-grams otherwise.
    #[arg(long)]
    pub embedder_endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML config file; `LITDEX_*` environment variables override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => EXIT_USER,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Internal(m) => m,
        }
    }
}

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

pub fn cmd_build(args: &BuildArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let articles = parse_corpus(&args.input).map_err(user)?;
    if articles.is_empty() {
        return Err(CliError::User(format!("{} contains no articles", args.input.display())));
    }
    let config = IndexConfig::new(args.scheme).with_bm25(args.k1, args.b);
    let index = build_from_articles(articles, config).map_err(user)?;
    save_index(&index, &args.out).map_err(user)?;
    writeln!(
        out,
        "built {} index at {}: N={} avgdl={:.3} vocabulary={}",
        index.scheme(),
        args.out.display(),
        index.unit_count(),
        index.avgdl(),
        index.vocabulary_size()
    )
    .map_err(|e| CliError::Internal(e.to_string()))
}

impl SearchArgs {
    pub fn request(&self) -> SearchRequest {
        let mut req = SearchRequest::new(
            self.query.clone(),
            RequestDefaults {
                k_first_stage: self.k,
                max_results: self.max_results,
                rerank: self.rerank,
            },
        );
        req.filters.year_from = self.year_from;
        req.filters.year_to = self.year_to;
        req.filters.journals = self.journal.iter().cloned().collect();
        req.filters.sources = self.source.iter().cloned().collect();
        req.filters.authors = self.author.iter().cloned().collect();
        req
    }

    pub fn settings(&self) -> EngineSettings {
        let mut settings = EngineSettings::default();
        if let Some(endpoint) = &self.scorer_endpoint {
            settings.scorer = ScorerKind::External(ExternalScorerConfig {
                endpoint: endpoint.clone(),
                timeout_ms: self.scorer_timeout_ms,
                ..Default::default()
            });
        }
        if let Some(endpoint) = &self.embedder_endpoint {
            settings.embedder = EmbeddingProvider::External(ExternalEncoderConfig {
                endpoint: endpoint.clone(),
                ..Default::default()
            });
        }
        settings
    }
}

fn render_table(resp: &SearchResponse) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{} results for {:?} ({} first-stage hits, scorer {}, {:.1} ms)\n",
        resp.results.len(),
        resp.query,
        resp.total_hits,
        resp.scorer,
        resp.timing.total_ms
    ));
    for r in &resp.results {
        let year = r.year.map(|y| y.to_string()).unwrap_or_else(|| "----".into());
        s.push_str(&format!("{:>3}. {:>8.4}  {:<16} {}  {}\n", r.rank, r.score, r.article_id, year, r.title));
        if let Some(h) = &r.highlight {
            s.push_str(&format!("       > {}\n", h.text));
        }
    }
    s
}

pub fn cmd_search(args: &SearchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let request = args.request();
    request.validate().map_err(user)?;
    let index = load_index(&args.index).map_err(user)?;
    let engine = Engine::new(index, args.settings()).map_err(user)?;
    let response = engine.search(&request);
    let io = |e: std::io::Error| CliError::Internal(e.to_string());
    if response.degraded {
        writeln!(err, "warning: external backend unavailable; results are degraded (lexical / hash n-gram fallback)")
            .map_err(io)?;
    }
    if args.json {
        let json = serde_json::to_string_pretty(&response).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out, "{json}").map_err(io)
    } else {
        write!(out, "{}", render_table(&response)).map_err(io)
    }
}

pub fn cmd_compare_granularity(args: &CompareArgs, out: &mut dyn Write) -> Result<GranularityReport, CliError> {
    if args.k == 0 {
        return Err(CliError::User("--k must be >= 1".into()));
    }
    let articles = parse_corpus(&args.input).map_err(user)?;
    if articles.is_empty() {
        return Err(CliError::User(format!("{} contains no articles", args.input.display())));
    }
    let text = std::fs::read_to_string(&args.queries)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", args.queries.display())))?;
    let queries = parse_queries(&text);
    if queries.is_empty() {
        return Err(CliError::User(format!("queries file {} is empty", args.queries.display())));
    }
    let report = compare_granularity(&articles, &queries, args.k, IndexConfig::new(GranularityScheme::ParagraphLevel))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let io = |e: std::io::Error| CliError::Internal(e.to_string());
    if args.json {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out, "{json}").map_err(io)?;
    } else {
        write!(out, "{}", report.to_table()).map_err(io)?;
    }
    Ok(report)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(user)?,
        None => ServiceConfig::from_toml_with_env("", std::env::vars()).map_err(user)?,
    };
    if let Some(bind) = &args.bind {
        config.bind = bind.clone();
    }
    if let Some(index) = &args.index {
        config.index_path = index.clone();
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(serve(config)).map_err(|e| match e {
        ServeError::Server(_) => CliError::Internal(e.to_string()),
        other => CliError::User(other.to_string()),
    })
}

/// Parse `args` and run the selected command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a, &mut stdout.lock()),
        Command::Search(a) => cmd_search(a, &mut stdout.lock(), &mut stderr.lock()),
        Command::CompareGranularity(a) => cmd_compare_granularity(a, &mut stdout.lock()).map(|_| ()),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
