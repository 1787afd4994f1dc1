//! Article ingestion and expansion into retrieval units.
//!
//! An [`Article`] is expanded into one or more [`RetrievalUnit`]s according to a
//! [`GranularityScheme`]. Under [`GranularityScheme::ParagraphLevel`] an article
//! with `n` paragraphs yields `n + 1` units: one title+abstract unit plus one unit
//! per paragraph, each carrying the title and abstract as context.

mod sentences;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sentences::{segment_sentences, SentenceSpan, ABBREVIATION_GUARDS};

/// Facet value used when an article has no year or journal.
pub const UNKNOWN_FACET: &str = "unknown";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed article record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate article_id {id:?}")]
    DuplicateId { line: usize, id: String },
}

/// One scholarly article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub article_id: String,
    pub title: String,
    #[serde(default)]
    pub abstract_text: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub journal: Option<String>,
    pub source: String,
}

/// Wire form of an article line. Kept separate so the Rust field name for the
/// abstract does not collide with the keyword.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArticleRecord {
    article_id: String,
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_text: String,
    #[serde(default)]
    paragraphs: Vec<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    authors: Vec<String>,
    #[serde(default)]
    journal: Option<String>,
    source: String,
}

impl From<ArticleRecord> for Article {
    fn from(r: ArticleRecord) -> Self {
        Article {
            article_id: r.article_id,
            title: r.title,
            abstract_text: r.abstract_text,
            paragraphs: r.paragraphs,
            year: r.year,
            authors: r.authors,
            journal: r.journal,
            source: r.source,
        }
    }
}

impl From<&Article> for ArticleRecord {
    fn from(a: &Article) -> Self {
        ArticleRecord {
            article_id: a.article_id.clone(),
            title: a.title.clone(),
            abstract_text: a.abstract_text.clone(),
            paragraphs: a.paragraphs.clone(),
            year: a.year,
            authors: a.authors.clone(),
            journal: a.journal.clone(),
            source: a.source.clone(),
        }
    }
}

impl Article {
    /// Number of full-text paragraphs (`n`).
    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn has_full_text(&self) -> bool {
        !self.paragraphs.is_empty()
    }

    pub fn facets(&self) -> FacetSnapshot {
        FacetSnapshot {
            year: self.year,
            authors: self.authors.clone(),
            journal: self.journal.clone(),
            source: self.source.clone(),
        }
    }

    /// Parse one JSONL line. Paragraphs that are blank after trimming are dropped.
    pub fn from_json_line(line: &str) -> Result<Article, serde_json::Error> {
        let record: ArticleRecord = serde_json::from_str(line)?;
        let mut article = Article::from(record);
        article.paragraphs.retain(|p| !p.trim().is_empty());
        Ok(article)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&ArticleRecord::from(self)).expect("article serializes")
    }

    /// JSON value using the external field names (`abstract`, not `abstract_text`).
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ArticleRecord::from(self)).expect("article serializes")
    }
}

/// Facet fields copied from the owning article onto every unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSnapshot {
    pub year: Option<i32>,
    pub authors: Vec<String>,
    pub journal: Option<String>,
    pub source: String,
}

impl FacetSnapshot {
    pub fn year_value(&self) -> String {
        self.year
            .map(|y| y.to_string())
            .unwrap_or_else(|| UNKNOWN_FACET.to_string())
    }

    pub fn journal_value(&self) -> &str {
        self.journal.as_deref().unwrap_or(UNKNOWN_FACET)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GranularityScheme {
    /// Title and abstract only.
    AbstractOnly,
    /// Whole article as one unit.
    FullTextMonolithic,
    /// Title+abstract unit plus one unit per paragraph.
    ParagraphLevel,
}

impl GranularityScheme {
    pub const ALL: [GranularityScheme; 3] = [
        GranularityScheme::AbstractOnly,
        GranularityScheme::FullTextMonolithic,
        GranularityScheme::ParagraphLevel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GranularityScheme::AbstractOnly => "abstract_only",
            GranularityScheme::FullTextMonolithic => "full_text_monolithic",
            GranularityScheme::ParagraphLevel => "paragraph_level",
        }
    }
}

impl fmt::Display for GranularityScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GranularityScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "abstract" | "abstract_only" => Ok(GranularityScheme::AbstractOnly),
            "b" | "full" | "fulltext" | "full_text" | "full_text_monolithic" => {
                Ok(GranularityScheme::FullTextMonolithic)
            }
            "c" | "paragraph" | "paragraphs" | "paragraph_level" => {
                Ok(GranularityScheme::ParagraphLevel)
            }
            other => Err(format!(
                "unknown granularity scheme {other:?} (expected abstract, fulltext or paragraph)"
            )),
        }
    }
}

/// One indexable "document".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalUnit {
    pub unit_id: String,
    pub article_id: String,
    pub paragraph_index: Option<usize>,
    pub text: String,
    pub facets: FacetSnapshot,
}

/// Read a JSONL corpus, one article per line. Blank lines are skipped.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Article>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);

    let mut seen = HashSet::new();
    let mut articles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let article = Article::from_json_line(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if article.article_id.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "article_id must be non-empty".into(),
            });
        }
        if !seen.insert(article.article_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: article.article_id,
            });
        }
        articles.push(article);
    }
    Ok(articles)
}

fn join_fields<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts.into_iter().collect::<Vec<_>>().join("\n")
}

/// Expand an article into retrieval units. Fields are joined with a single newline.
pub fn expand_granularity(article: &Article, scheme: GranularityScheme) -> Vec<RetrievalUnit> {
    let facets = article.facets();
    let head = [article.title.as_str(), article.abstract_text.as_str()];
    let unit = |suffix: &str, paragraph_index: Option<usize>, text: String| RetrievalUnit {
        unit_id: format!("{}{}", article.article_id, suffix),
        article_id: article.article_id.clone(),
        paragraph_index,
        text,
        facets: facets.clone(),
    };

    match scheme {
        GranularityScheme::AbstractOnly => vec![unit("", None, join_fields(head))],
        GranularityScheme::FullTextMonolithic => {
            let text = join_fields(
                head.into_iter()
                    .chain(article.paragraphs.iter().map(String::as_str)),
            );
            vec![unit("", None, text)]
        }
        GranularityScheme::ParagraphLevel => {
            let mut units = Vec::with_capacity(article.paragraphs.len() + 1);
            units.push(unit("", None, join_fields(head)));
            for (i, paragraph) in article.paragraphs.iter().enumerate() {
                let text = join_fields(head.into_iter().chain([paragraph.as_str()]));
                units.push(unit(&format!(".{i}"), Some(i), text));
            }
            units
        }
    }
}

/// Expand a whole corpus in article order.
pub fn expand_corpus(articles: &[Article], scheme: GranularityScheme) -> Vec<RetrievalUnit> {
    articles
        .iter()
        .flat_map(|a| expand_granularity(a, scheme))
        .collect()
}
