//! Second-stage reranking.
//!
//! Every first-stage hit is cut into overlapping windows of sentences, each
//! window is scored independently, and an article takes the maximum span
//! probability over all of its retrieved units. The final list holds each
//! article once.

mod scorer;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_sentences, SentenceSpan};
use crate::index::{Hit, InvertedIndex};

pub use scorer::{
    format_scorer_input, relevance_probability, ExternalScorer, ExternalScorerConfig, LexicalScorer,
    RelevanceScorer, ScorerError, ScorerKind, LEXICAL_TF_CAP,
};
pub(crate) use scorer::{http_agent, route};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_STRIDE: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RerankError {
    #[error("invalid window {window} / stride {stride}: need window >= 1 and 1 <= stride <= window")]
    InvalidWindow { window: usize, stride: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.window == 0 || self.stride == 0 || self.stride > self.window {
            return Err(RerankError::InvalidWindow {
                window: self.window,
                stride: self.stride,
            });
        }
        Ok(())
    }
}

/// Sentence index ranges of the windows over `n_sent` sentences.
///
/// Starts are `0, stride, 2*stride, ...`; each window is truncated at `n_sent`
/// and generation stops after the first window that reaches the last sentence.
/// Zero sentences yield the single empty range `0..0`.
pub fn window_ranges(n_sent: usize, config: WindowConfig) -> Result<Vec<Range<usize>>, RerankError> {
    config.validate()?;
    let mut ranges = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.window).min(n_sent);
        ranges.push(start..end);
        if end >= n_sent {
            return Ok(ranges);
        }
        start += config.stride;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub article_id: String,
    pub unit_ordinal: u32,
    /// `[start, end)` sentence indices within the unit text.
    pub sentence_range: (usize, usize),
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub span: Span,
    pub probability: f64,
}

/// Build spans over one unit's text. With no sentences the whole raw text is one span.
pub fn make_spans(
    text: &str,
    sentences: &[SentenceSpan],
    article_id: &str,
    unit_ordinal: u32,
    config: WindowConfig,
) -> Result<Vec<Span>, RerankError> {
    let ranges = window_ranges(sentences.len(), config)?;
    Ok(ranges
        .into_iter()
        .map(|r| {
            let text = if sentences.is_empty() {
                text.to_string()
            } else {
                sentences[r.clone()]
                    .iter()
                    .map(|s| s.slice(text))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            Span {
                article_id: article_id.to_string(),
                unit_ordinal,
                sentence_range: (r.start, r.end),
                text,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArticle {
    pub article_id: String,
    pub score: f64,
    pub best_span: Span,
    /// Best first-stage BM25 score among this article's hits.
    pub best_bm25: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRanking {
    pub entries: Vec<RankedArticle>,
    pub first_stage_k: usize,
    pub scorer: String,
    /// The configured scorer failed and lexical scores were used instead.
    pub degraded: bool,
}

fn span_precedes(a: &ScoredSpan, b: &ScoredSpan) -> bool {
    // Higher probability wins; ties go to the earlier unit, then the earlier window.
    match a.probability.total_cmp(&b.probability) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            (a.span.unit_ordinal, a.span.sentence_range.0)
                < (b.span.unit_ordinal, b.span.sentence_range.0)
        }
    }
}

/// Max-aggregate scored spans per article and order the articles.
///
/// `best_bm25` maps each article to its best first-stage score, used as the
/// first tie-breaker; article id ascending is the last.
pub fn aggregate_spans(
    scored: Vec<ScoredSpan>,
    best_bm25: &BTreeMap<String, f64>,
) -> Vec<RankedArticle> {
    let mut best: BTreeMap<String, ScoredSpan> = BTreeMap::new();
    for s in scored {
        match best.get_mut(&s.span.article_id) {
            Some(current) => {
                if span_precedes(&s, current) {
                    *current = s;
                }
            }
            None => {
                best.insert(s.span.article_id.clone(), s);
            }
        }
    }
    let mut entries: Vec<RankedArticle> = best
        .into_iter()
        .map(|(article_id, s)| RankedArticle {
            best_bm25: best_bm25.get(&article_id).copied().unwrap_or(0.0),
            article_id,
            score: s.probability,
            best_span: s.span,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.best_bm25.total_cmp(&a.best_bm25))
            .then_with(|| a.article_id.cmp(&b.article_id))
    });
    entries
}

/// Best BM25 score per article among `hits`.
pub fn best_bm25_by_article(hits: &[Hit]) -> BTreeMap<String, f64> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for h in hits {
        best.entry(h.article_id.clone())
            .and_modify(|s| *s = s.max(h.bm25_score))
            .or_insert(h.bm25_score);
    }
    best
}

/// First-stage order collapsed to one entry per article: each article keeps its
/// highest-ranked hit, in the order the hits were given.
pub fn dedup_hits(hits: &[Hit]) -> Vec<&Hit> {
    let mut seen = std::collections::HashSet::new();
    hits.iter().filter(|h| seen.insert(h.article_id.as_str())).collect()
}

/// Spans for every hit, in hit order.
pub fn spans_for_hits(index: &InvertedIndex, hits: &[Hit], config: WindowConfig) -> Result<Vec<Span>, RerankError> {
    let mut spans = Vec::new();
    for hit in hits {
        let unit = index.unit(hit.unit_ordinal);
        let sentences = segment_sentences(&unit.text);
        spans.extend(make_spans(&unit.text, &sentences, &hit.article_id, hit.unit_ordinal, config)?);
    }
    Ok(spans)
}

/// Rerank first-stage hits into a deduplicated article ranking.
///
/// If `scorer` fails, every span is rescored with [`LexicalScorer`] and the
/// ranking is marked degraded.
pub fn rerank(
    query: &str,
    hits: &[Hit],
    index: &InvertedIndex,
    scorer: &dyn RelevanceScorer,
    config: WindowConfig,
) -> Result<ArticleRanking, RerankError> {
    let spans = spans_for_hits(index, hits, config)?;
    let texts: Vec<&str> = spans.iter().map(|s| s.text.as_str()).collect();

    let mut scorer_name = scorer.kind();
    let (probabilities, degraded) = match scorer.score_batch(query, &texts) {
        Ok(p) => (p, false),
        Err(e) => {
            tracing::warn!(error = %e, scorer = scorer.kind(), "span scorer failed, falling back to lexical");
            scorer_name = LexicalScorer.kind();
            (LexicalScorer.score_batch(query, &texts).expect("lexical scorer is infallible"), true)
        }
    };

    let scored = spans
        .into_iter()
        .zip(probabilities)
        .map(|(span, p)| ScoredSpan {
            span,
            probability: p.clamp(0.0, 1.0),
        })
        .collect();
    Ok(ArticleRanking {
        entries: aggregate_spans(scored, &best_bm25_by_article(hits)),
        first_stage_k: hits.len(),
        scorer: scorer_name.to_string(),
        degraded,
    })
}
