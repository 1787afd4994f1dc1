//! Unsupervised salient-sentence highlighting.
//!
//! Query and paragraph tokens are embedded; each paragraph token's salience is
//! its best cosine similarity to any query token (clipped at zero). The `K` most
//! salient tokens are kept and each sentence is scored by the summed salience
//! of the kept tokens it contains.

mod embed;

use serde::{Deserialize, Serialize};

use crate::corpus::{segment_sentences, SentenceSpan};
use crate::index::analyze_terms;

pub use embed::{
    char_ngrams, fnv1a64, l2_normalize, splitmix64, EmbedError, EmbeddingProvider, ExternalEncoder,
    ExternalEncoderConfig, HashNGramEmbedder, TokenEmbedder, HASH_DIM, NGRAM_ORDERS,
};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_MAX_SENTENCES: usize = 1;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `matrix[i][j]` = cosine of query token `i` and context token `j`.
pub fn cosine_matrix(query_vecs: &[Vec<f64>], context_vecs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    query_vecs
        .iter()
        .map(|q| context_vecs.iter().map(|c| cosine(q, c)).collect())
        .collect()
}

/// Per context token: max cosine over query tokens, clipped below at 0.
/// All zeros when there are no query vectors.
pub fn token_salience(query_vecs: &[Vec<f64>], context_vecs: &[Vec<f64>]) -> Vec<f64> {
    context_vecs
        .iter()
        .map(|c| {
            query_vecs
                .iter()
                .map(|q| cosine(q, c))
                .fold(0.0f64, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopWord {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightResult {
    pub sentence_index: usize,
    pub sentence_span: SentenceSpan,
    /// Sum of the sentence's top-K token saliences.
    pub salience: f64,
    pub top_words: Vec<TopWord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HighlightParams {
    pub top_k: usize,
    pub max_sentences: usize,
}

impl Default for HighlightParams {
    fn default() -> Self {
        HighlightParams {
            top_k: DEFAULT_TOP_K,
            max_sentences: DEFAULT_MAX_SENTENCES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HighlightOutput {
    pub results: Vec<HighlightResult>,
    /// The embedder failed and the hash n-gram embedder was used instead.
    pub degraded: bool,
}

fn embed_with_fallback(embedder: &dyn TokenEmbedder, tokens: &[String]) -> (Vec<Vec<f64>>, bool) {
    match embedder.embed(tokens) {
        Ok(v) => (v, false),
        Err(e) => {
            tracing::warn!(error = %e, "token embedder failed, falling back to hash n-grams");
            let v = HashNGramEmbedder.embed(tokens).expect("hash embedder is infallible");
            (v, true)
        }
    }
}

/// Pick up to `max_sentences` sentences of `paragraph` most salient to `query`.
pub fn select_highlights(
    paragraph: &str,
    query: &str,
    embedder: &dyn TokenEmbedder,
    params: HighlightParams,
) -> HighlightOutput {
    let sentences = segment_sentences(paragraph);
    let mut context: Vec<(String, usize)> = Vec::new();
    for (si, s) in sentences.iter().enumerate() {
        context.extend(analyze_terms(s.slice(paragraph)).map(|t| (t, si)));
    }
    let mut query_tokens: Vec<String> = Vec::new();
    for t in analyze_terms(query) {
        if !query_tokens.contains(&t) {
            query_tokens.push(t);
        }
    }
    if context.is_empty() || query_tokens.is_empty() || params.top_k == 0 || params.max_sentences == 0 {
        return HighlightOutput::default();
    }

    let mut all: Vec<String> = query_tokens.clone();
    all.extend(context.iter().map(|(t, _)| t.clone()));
    let (vectors, degraded) = embed_with_fallback(embedder, &all);
    let (query_vecs, context_vecs) = vectors.split_at(query_tokens.len());
    let salience = token_salience(query_vecs, context_vecs);

    let mut order: Vec<usize> = (0..context.len()).collect();
    order.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
    order.truncate(params.top_k);
    order.sort_unstable();

    let mut scores = vec![0.0f64; sentences.len()];
    let mut words: Vec<Vec<TopWord>> = vec![Vec::new(); sentences.len()];
    for &j in &order {
        let (term, si) = &context[j];
        scores[*si] += salience[j];
        words[*si].push(TopWord {
            term: term.clone(),
            score: salience[j],
        });
    }

    let mut ranked: Vec<usize> = (0..sentences.len()).filter(|&i| scores[i] > 0.0).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ranked.truncate(params.max_sentences);

    HighlightOutput {
        results: ranked
            .into_iter()
            .map(|i| HighlightResult {
                sentence_index: i,
                sentence_span: sentences[i],
                salience: scores[i],
                top_words: std::mem::take(&mut words[i]),
            })
            .collect(),
        degraded,
    }
}
