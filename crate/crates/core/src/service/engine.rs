//! The query pipeline shared by the HTTP service, the CLI and the C API.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, SentenceSpan};
use crate::highlight::{select_highlights, EmbeddingProvider, HighlightParams, TokenEmbedder};
use crate::index::{compute_facets, FacetCounts, Hit, InvertedIndex};
use crate::rerank::{dedup_hits, rerank, RelevanceScorer, ScorerKind, WindowConfig};

use super::request::{RequestDefaults, SearchRequest};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("index has no article table; rebuild it from a corpus")]
    NoArticles,
    #[error("invalid window configuration: {0}")]
    Window(#[from] crate::rerank::RerankError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineSettings {
    pub scorer: ScorerKind,
    pub embedder: EmbeddingProvider,
    pub window: WindowConfig,
    pub highlight: HighlightParams,
    pub defaults: RequestDefaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightRange {
    /// Unicode scalar offsets into `paragraph`, end exclusive.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub rank: usize,
    pub article_id: String,
    pub title: String,
    pub year: Option<i32>,
    pub authors: Vec<String>,
    pub journal: Option<String>,
    pub source: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub has_full_text: bool,
    /// Rerank probability, or the BM25 score when reranking is off.
    pub score: f64,
    pub bm25_score: f64,
    /// Paragraph of the best-scoring unit; absent when that unit is the
    /// title+abstract (or whole-article) unit, in which case `paragraph` holds the abstract.
    pub paragraph_index: Option<usize>,
    pub paragraph: String,
    pub highlight: Option<HighlightRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub retrieval_ms: f64,
    pub rerank_ms: f64,
    pub highlight_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub results: Vec<SearchResult>,
    /// Counts over the filtered first-stage hits, before reranking.
    pub facets: FacetCounts,
    pub total_hits: usize,
    pub reranked: bool,
    pub scorer: String,
    pub timing: Timing,
    pub degraded: bool,
}

impl SearchResponse {
    /// JSON body with timing zeroed, for comparing responses.
    pub fn without_timing(&self) -> SearchResponse {
        SearchResponse {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// One deduplicated candidate before rendering.
struct Candidate {
    article_id: String,
    score: f64,
    bm25: f64,
    unit_ordinal: u32,
}

pub struct Engine {
    index: InvertedIndex,
    settings: EngineSettings,
    scorer: Box<dyn RelevanceScorer>,
    embedder: Box<dyn TokenEmbedder>,
}

impl Engine {
    pub fn new(index: InvertedIndex, settings: EngineSettings) -> Result<Self, EngineError> {
        if index.articles().is_empty() {
            return Err(EngineError::NoArticles);
        }
        settings.window.validate()?;
        Ok(Engine {
            scorer: settings.scorer.build(),
            embedder: settings.embedder.build(),
            index,
            settings,
        })
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn defaults(&self) -> RequestDefaults {
        self.settings.defaults
    }

    pub fn article(&self, article_id: &str) -> Option<&Article> {
        self.index.article(article_id)
    }

    /// Text shown for a unit: its paragraph, else the abstract, else the title.
    fn display_text<'a>(&self, article: &'a Article, unit_ordinal: u32) -> (Option<usize>, &'a str) {
        let unit = self.index.unit(unit_ordinal);
        match unit.paragraph_index.and_then(|i| article.paragraphs.get(i).map(|p| (i, p))) {
            Some((i, p)) => (Some(i), p.as_str()),
            None if !article.abstract_text.trim().is_empty() => (None, article.abstract_text.as_str()),
            None => (None, article.title.as_str()),
        }
    }

    /// Run the full pipeline. The request is assumed valid (see [`SearchRequest::validate`]).
    pub fn search(&self, request: &SearchRequest) -> SearchResponse {
        let start = Instant::now();
        let hits: Vec<Hit> = self
            .index
            .search(&request.q, request.k_first_stage, &request.filters);
        let facets = compute_facets(&self.index, &hits);
        let retrieval_ms = elapsed_ms(start);

        let rerank_start = Instant::now();
        let mut degraded = false;
        let mut scorer_name = "bm25".to_string();
        let candidates: Vec<Candidate> = if request.rerank {
            let ranking = rerank(&request.q, &hits, &self.index, self.scorer.as_ref(), self.settings.window)
                .expect("window validated at construction");
            degraded |= ranking.degraded;
            scorer_name = ranking.scorer;
            ranking
                .entries
                .into_iter()
                .map(|e| Candidate {
                    article_id: e.article_id,
                    score: e.score,
                    bm25: e.best_bm25,
                    unit_ordinal: e.best_span.unit_ordinal,
                })
                .collect()
        } else {
            dedup_hits(&hits)
                .into_iter()
                .map(|h| Candidate {
                    article_id: h.article_id.clone(),
                    score: h.bm25_score,
                    bm25: h.bm25_score,
                    unit_ordinal: h.unit_ordinal,
                })
                .collect()
        };
        let rerank_ms = elapsed_ms(rerank_start);

        let highlight_start = Instant::now();
        let mut results = Vec::new();
        for (rank, c) in candidates.into_iter().take(request.max_results).enumerate() {
            let Some(article) = self.index.article(&c.article_id) else {
                continue;
            };
            let (paragraph_index, paragraph) = self.display_text(article, c.unit_ordinal);
            let out = select_highlights(paragraph, &request.q, self.embedder.as_ref(), self.settings.highlight);
            degraded |= out.degraded;
            let highlight = out.results.first().map(|h| {
                let span: SentenceSpan = h.sentence_span;
                HighlightRange {
                    start: span.start_char,
                    end: span.end_char,
                    text: span.slice(paragraph).to_string(),
                    salience: h.salience,
                }
            });
            results.push(SearchResult {
                rank: rank + 1,
                article_id: article.article_id.clone(),
                title: article.title.clone(),
                year: article.year,
                authors: article.authors.clone(),
                journal: article.journal.clone(),
                source: article.source.clone(),
                abstract_text: article.abstract_text.clone(),
                has_full_text: article.has_full_text(),
                score: c.score,
                bm25_score: c.bm25,
                paragraph_index,
                paragraph: paragraph.to_string(),
                highlight,
            });
        }
        let highlight_ms = elapsed_ms(highlight_start);

        SearchResponse {
            query: request.q.clone(),
            results,
            facets,
            total_hits: hits.len(),
            reranked: request.rerank,
            scorer: scorer_name,
            timing: Timing {
                retrieval_ms,
                rerank_ms,
                highlight_ms,
                total_ms: elapsed_ms(start),
            },
            degraded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GranularityScheme;
    use crate::index::{build_from_articles, build_index, IndexConfig};

    fn article(id: &str, abstract_text: &str, paragraphs: &[&str]) -> Article {
        Article {
            article_id: id.into(),
            title: format!("Title {id}"),
            abstract_text: abstract_text.into(),
            paragraphs: paragraphs.iter().map(|s| s.to_string()).collect(),
            year: Some(2020),
            authors: vec!["A. Author".into()],
            journal: Some("J".into()),
            source: "pmc".into(),
        }
    }

    fn engine() -> Engine {
        let articles = vec![
            article(
                "a1",
                "Respiratory illness overview.",
                &[
                    "Hospitals reported many admissions. The novel coronavirus spreads by droplets. Masks reduce risk.",
                    "Vaccines are under development.",
                ],
            ),
            article("a2", "Influenza seasonality in temperate regions.", &[]),
            article("a3", "Cell biology basics.", &["Membranes and proteins."]),
        ];
        let index = build_from_articles(articles, IndexConfig::new(GranularityScheme::ParagraphLevel)).unwrap();
        Engine::new(index, EngineSettings::default()).unwrap()
    }

    #[test]
    fn coronavirus_article_first_and_highlighted() {
        let e = engine();
        let resp = e.search(&SearchRequest::new("coronavirus", RequestDefaults::default()));
        assert_eq!(resp.results.len(), 1);
        let r = &resp.results[0];
        assert_eq!(r.article_id, "a1");
        assert_eq!(r.paragraph_index, Some(0));
        let h = r.highlight.as_ref().unwrap();
        assert_eq!(h.text, "The novel coronavirus spreads by droplets.");
        assert_eq!(h.text, r.paragraph.chars().skip(h.start).take(h.end - h.start).collect::<String>());
        assert!(!resp.degraded);
        assert_eq!(resp.scorer, "lexical");
        assert_eq!(resp.facets.year[0].count, 1);
    }

    #[test]
    fn abstract_unit_shows_abstract() {
        let e = engine();
        let resp = e.search(&SearchRequest::new("influenza", RequestDefaults::default()));
        let r = &resp.results[0];
        assert_eq!(r.article_id, "a2");
        assert_eq!(r.paragraph_index, None);
        assert_eq!(r.paragraph, "Influenza seasonality in temperate regions.");
        assert!(!r.has_full_text);
    }

    #[test]
    fn bm25_only_mode() {
        let e = engine();
        let mut req = SearchRequest::new("title", RequestDefaults::default());
        req.rerank = false;
        let resp = e.search(&req);
        assert_eq!(resp.results.len(), 3);
        assert_eq!(resp.scorer, "bm25");
        for w in resp.results.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn engine_requires_articles() {
        let index = build_index(
            crate::corpus::expand_granularity(&article("x", "y", &[]), GranularityScheme::AbstractOnly),
            IndexConfig::new(GranularityScheme::AbstractOnly),
        )
        .unwrap();
        assert!(matches!(Engine::new(index, EngineSettings::default()), Err(EngineError::NoArticles)));
    }
}
