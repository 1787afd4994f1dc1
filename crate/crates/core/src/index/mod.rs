//! Immutable inverted index over retrieval units with BM25 statistics and facet maps.

mod analyze;
mod facets;
mod persist;
mod search;
pub mod varint;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{expand_corpus, Article, FacetSnapshot, GranularityScheme, RetrievalUnit};

pub use analyze::{analyze, analyze_terms, is_stopword, AnalyzedToken, STOPWORDS};
pub use facets::{compute_facets, FacetCounts, FacetField, FacetValueCount};
pub use persist::{load_index, save_index, FORMAT_VERSION};
pub use search::{bm25_term_weight, idf, query_terms, FilterSet, Hit};

pub const DEFAULT_K1: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero retrieval units")]
    EmptyUnits,
    #[error("duplicate unit_id {0:?}")]
    DuplicateUnitId(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("unit {unit_id:?} references article {article_id:?} missing from the article table")]
    MissingArticle { unit_id: String, article_id: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing index file {0}")]
    MissingFile(String),
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch for {0}")]
    Checksum(String),
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub unit: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    pub scheme: GranularityScheme,
    pub k1: f64,
    pub b: f64,
}

impl IndexConfig {
    pub fn new(scheme: GranularityScheme) -> Self {
        IndexConfig {
            scheme,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }

    pub fn with_bm25(mut self, k1: f64, b: f64) -> Self {
        self.k1 = k1;
        self.b = b;
        self
    }

    fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(IndexError::InvalidParams(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format_version: u32,
    pub scheme: GranularityScheme,
    pub k1: f64,
    pub b: f64,
    /// Seconds since the Unix epoch.
    pub built_at: u64,
    pub stemming: bool,
}

/// Facet value → unit ordinals, per facet field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacetMaps {
    pub year: BTreeMap<String, Vec<u32>>,
    pub authors: BTreeMap<String, Vec<u32>>,
    pub journal: BTreeMap<String, Vec<u32>>,
    pub source: BTreeMap<String, Vec<u32>>,
}

impl FacetMaps {
    fn build(units: &[RetrievalUnit]) -> Self {
        let mut maps = FacetMaps::default();
        for (ordinal, unit) in units.iter().enumerate() {
            let ordinal = ordinal as u32;
            let f = &unit.facets;
            maps.year.entry(f.year_value()).or_default().push(ordinal);
            let authors: HashSet<&String> = f.authors.iter().collect();
            for author in authors {
                maps.authors.entry(author.clone()).or_default().push(ordinal);
            }
            maps.journal
                .entry(f.journal_value().to_string())
                .or_default()
                .push(ordinal);
            maps.source.entry(f.source.clone()).or_default().push(ordinal);
        }
        maps
    }

    pub fn field(&self, field: FacetField) -> &BTreeMap<String, Vec<u32>> {
        match field {
            FacetField::Year => &self.year,
            FacetField::Authors => &self.authors,
            FacetField::Journal => &self.journal,
            FacetField::Source => &self.source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    meta: IndexMeta,
    dictionary: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
    units: Vec<RetrievalUnit>,
    articles: Vec<Article>,
    article_lookup: HashMap<String, usize>,
    facets: FacetMaps,
}

/// Build an index over `units`. Unit ordinals follow input order.
pub fn build_index(units: Vec<RetrievalUnit>, config: IndexConfig) -> Result<InvertedIndex, IndexError> {
    config.validate()?;
    if units.is_empty() {
        return Err(IndexError::EmptyUnits);
    }
    let mut ids = HashSet::with_capacity(units.len());
    for unit in &units {
        if !ids.insert(unit.unit_id.as_str()) {
            return Err(IndexError::DuplicateUnitId(unit.unit_id.clone()));
        }
    }

    let mut dictionary: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for (ordinal, unit) in units.iter().enumerate() {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for term in analyze_terms(&unit.text) {
            *counts.entry(term).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            dictionary.entry(term).or_default().push(Posting {
                unit: ordinal as u32,
                tf,
            });
        }
    }

    let meta = IndexMeta {
        format_version: FORMAT_VERSION,
        scheme: config.scheme,
        k1: config.k1,
        b: config.b,
        built_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        stemming: false,
    };
    Ok(InvertedIndex::assemble(meta, dictionary, units, Vec::new()))
}

/// Expand `articles` under the configured scheme and index the resulting units,
/// keeping the article table for result rendering.
pub fn build_from_articles(articles: Vec<Article>, config: IndexConfig) -> Result<InvertedIndex, IndexError> {
    let units = expand_corpus(&articles, config.scheme);
    let mut index = build_index(units, config)?;
    index.attach_articles(articles)?;
    Ok(index)
}

impl InvertedIndex {
    /// Derive lengths, statistics and facet maps. Postings are taken as given
    /// (units are visited in ordinal order during build, so lists are sorted).
    fn assemble(
        meta: IndexMeta,
        dictionary: BTreeMap<String, Vec<Posting>>,
        units: Vec<RetrievalUnit>,
        articles: Vec<Article>,
    ) -> Self {
        let mut doc_lengths = vec![0u32; units.len()];
        for postings in dictionary.values() {
            for p in postings {
                doc_lengths[p.unit as usize] += p.tf;
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avgdl = total as f64 / units.len() as f64;
        let facets = FacetMaps::build(&units);
        let article_lookup = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.article_id.clone(), i))
            .collect();
        InvertedIndex {
            meta,
            dictionary,
            doc_lengths,
            avgdl,
            units,
            articles,
            article_lookup,
            facets,
        }
    }

    fn attach_articles(&mut self, articles: Vec<Article>) -> Result<(), IndexError> {
        let lookup: HashMap<String, usize> = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.article_id.clone(), i))
            .collect();
        if let Some(unit) = self.units.iter().find(|u| !lookup.contains_key(&u.article_id)) {
            return Err(IndexError::MissingArticle {
                unit_id: unit.unit_id.clone(),
                article_id: unit.article_id.clone(),
            });
        }
        self.articles = articles;
        self.article_lookup = lookup;
        Ok(())
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn scheme(&self) -> GranularityScheme {
        self.meta.scheme
    }

    pub fn k1(&self) -> f64 {
        self.meta.k1
    }

    pub fn b(&self) -> f64 {
        self.meta.b
    }

    /// Number of retrieval units (N).
    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn vocabulary_size(&self) -> usize {
        self.dictionary.len()
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.dictionary.get(term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.dictionary.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn doc_length(&self, ordinal: u32) -> u32 {
        self.doc_lengths[ordinal as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn unit(&self, ordinal: u32) -> &RetrievalUnit {
        &self.units[ordinal as usize]
    }

    pub fn units(&self) -> &[RetrievalUnit] {
        &self.units
    }

    pub fn unit_facets(&self, ordinal: u32) -> &FacetSnapshot {
        &self.units[ordinal as usize].facets
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn article(&self, article_id: &str) -> Option<&Article> {
        self.article_lookup.get(article_id).map(|&i| &self.articles[i])
    }

    pub fn facet_maps(&self) -> &FacetMaps {
        &self.facets
    }
}
