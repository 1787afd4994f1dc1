//! Span relevance scorers.
//!
//! The external scorer speaks a small JSON protocol to a sequence-to-sequence
//! relevance model: `POST {endpoint}/score` with
//! `{"inputs": ["Query: q Document: d Relevant:", ...], "target_words": ["true","false"]}`
//! and expects `{"logits": [[l_true, l_false], ...]}` aligned by position.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{analyze_terms, query_terms};

/// Per-term cap on counted occurrences in the lexical scorer.
pub const LEXICAL_TF_CAP: u32 = 3;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer request failed: {0}")]
    Transport(String),
    #[error("malformed scorer response: {0}")]
    Malformed(String),
}

pub trait RelevanceScorer: Send + Sync {
    /// Short name reported in responses and health checks.
    fn kind(&self) -> &'static str;

    /// Probability of relevance in `[0, 1]` for each span text, aligned by position.
    fn score_batch(&self, query: &str, spans: &[&str]) -> Result<Vec<f64>, ScorerError>;
}

/// Two-way softmax over the target-word logits: `P(true)`.
///
/// Computed after subtracting the larger logit, so extreme logits do not overflow.
pub fn relevance_probability(logit_true: f64, logit_false: f64) -> f64 {
    let m = logit_true.max(logit_false);
    let t = (logit_true - m).exp();
    let f = (logit_false - m).exp();
    t / (t + f)
}

/// The exact model input for one query/span pair.
pub fn format_scorer_input(query: &str, document: &str) -> String {
    format!("Query: {query} Document: {document} Relevant:")
}

/// Deterministic stand-in: `c / (1 + c)` with `c` the sum over distinct query
/// terms of `min(tf, 3)` in the span.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl LexicalScorer {
    pub fn score(&self, query: &str, span_text: &str) -> f64 {
        let terms = query_terms(query);
        if terms.is_empty() {
            return 0.0;
        }
        let mut tf: HashMap<String, u32> = HashMap::new();
        for term in analyze_terms(span_text) {
            *tf.entry(term).or_insert(0) += 1;
        }
        let c: u32 = terms
            .iter()
            .map(|(t, _)| tf.get(t).copied().unwrap_or(0).min(LEXICAL_TF_CAP))
            .sum();
        let c = c as f64;
        c / (1.0 + c)
    }
}

impl RelevanceScorer for LexicalScorer {
    fn kind(&self) -> &'static str {
        "lexical"
    }

    fn score_batch(&self, query: &str, spans: &[&str]) -> Result<Vec<f64>, ScorerError> {
        Ok(spans.iter().map(|s| self.score(query, s)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalScorerConfig {
    /// Base URL; requests go to `{endpoint}/score`.
    pub endpoint: String,
    pub timeout_ms: u64,
    pub target_words: [String; 2],
    /// Spans per request. No effect on results.
    pub batch_size: usize,
}

impl Default for ExternalScorerConfig {
    fn default() -> Self {
        ExternalScorerConfig {
            endpoint: String::new(),
            timeout_ms: 10_000,
            target_words: ["true".into(), "false".into()],
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ScorerKind {
    #[default]
    Lexical,
    External(ExternalScorerConfig),
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Lexical => "lexical",
            ScorerKind::External(_) => "external",
        }
    }

    pub fn build(&self) -> Box<dyn RelevanceScorer> {
        match self {
            ScorerKind::Lexical => Box::new(LexicalScorer),
            ScorerKind::External(cfg) => Box::new(ExternalScorer::new(cfg.clone())),
        }
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    inputs: Vec<String>,
    target_words: &'a [String; 2],
}

#[derive(Deserialize)]
struct ScoreResponse {
    logits: Vec<Vec<f64>>,
}

pub(crate) fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(true)
        .build()
        .into()
}

pub(crate) fn route(endpoint: &str, path: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

/// HTTP client for a remote sequence-to-sequence relevance model.
pub struct ExternalScorer {
    config: ExternalScorerConfig,
    url: String,
    agent: ureq::Agent,
}

impl ExternalScorer {
    pub fn new(config: ExternalScorerConfig) -> Self {
        let agent = http_agent(Duration::from_millis(config.timeout_ms));
        let url = route(&config.endpoint, "/score");
        ExternalScorer { config, url, agent }
    }

    fn score_chunk(&self, query: &str, spans: &[&str]) -> Result<Vec<f64>, ScorerError> {
        let body = ScoreRequest {
            inputs: spans.iter().map(|d| format_scorer_input(query, d)).collect(),
            target_words: &self.config.target_words,
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        let parsed: ScoreResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ScorerError::Malformed(e.to_string()))?;
        if parsed.logits.len() != spans.len() {
            return Err(ScorerError::Malformed(format!(
                "expected {} logit pairs, got {}",
                spans.len(),
                parsed.logits.len()
            )));
        }
        parsed
            .logits
            .iter()
            .map(|pair| match pair.as_slice() {
                [t, f] if t.is_finite() && f.is_finite() => Ok(relevance_probability(*t, *f)),
                _ => Err(ScorerError::Malformed(format!("bad logit pair {pair:?}"))),
            })
            .collect()
    }
}

impl RelevanceScorer for ExternalScorer {
    fn kind(&self) -> &'static str {
        "external"
    }

    fn score_batch(&self, query: &str, spans: &[&str]) -> Result<Vec<f64>, ScorerError> {
        let mut out = Vec::with_capacity(spans.len());
        for chunk in spans.chunks(self.config.batch_size.max(1)) {
            out.extend(self.score_chunk(query, chunk)?);
        }
        Ok(out)
    }
}
