//! Token embedders.
//!
//! [`HashNGramEmbedder`] maps each token to the normalized sum of pseudo-random
//! ±1 vectors, one per character n-gram (orders 3 to 5) of the token padded
//! with `^` and `$`. Each n-gram's sign pattern is the bit pattern of a
//! SplitMix64 step seeded with the FNV-1a 64-bit hash of the n-gram's UTF-8
//! bytes, so tokens sharing n-grams get correlated vectors.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rerank::{http_agent, route};

pub const HASH_DIM: usize = 64;
pub const NGRAM_ORDERS: std::ops::RangeInclusive<usize> = 3..=5;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("encoder request failed: {0}")]
    Transport(String),
    #[error("malformed encoder response: {0}")]
    Malformed(String),
}

pub trait TokenEmbedder: Send + Sync {
    fn kind(&self) -> &'static str;

    /// One L2-normalized vector per token. Equal tokens map to equal vectors.
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Character n-grams of `^token$` for every configured order.
pub fn char_ngrams(token: &str) -> Vec<String> {
    let padded: Vec<char> = std::iter::once('^')
        .chain(token.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut grams = Vec::new();
    for order in NGRAM_ORDERS {
        if padded.len() < order {
            continue;
        }
        for w in padded.windows(order) {
            grams.push(w.iter().collect());
        }
    }
    grams
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashNGramEmbedder;

impl HashNGramEmbedder {
    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0f64; HASH_DIM];
        for gram in char_ngrams(token) {
            let bits = splitmix64(fnv1a64(gram.as_bytes()));
            for (i, x) in v.iter_mut().enumerate() {
                *x += if (bits >> i) & 1 == 1 { 1.0 } else { -1.0 };
            }
        }
        l2_normalize(&mut v);
        v
    }
}

impl TokenEmbedder for HashNGramEmbedder {
    fn kind(&self) -> &'static str {
        "hash_ngram"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
        Ok(tokens
            .iter()
            .map(|t| {
                cache
                    .entry(t.as_str())
                    .or_insert_with(|| self.embed_token(t))
                    .clone()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalEncoderConfig {
    /// Base URL; requests go to `{endpoint}/embed`.
    pub endpoint: String,
    pub timeout_ms: u64,
}

impl Default for ExternalEncoderConfig {
    fn default() -> Self {
        ExternalEncoderConfig {
            endpoint: String::new(),
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum EmbeddingProvider {
    #[default]
    HashNGram,
    External(ExternalEncoderConfig),
}

impl EmbeddingProvider {
    pub fn name(&self) -> &'static str {
        match self {
            EmbeddingProvider::HashNGram => "hash_ngram",
            EmbeddingProvider::External(_) => "external",
        }
    }

    pub fn build(&self) -> Box<dyn TokenEmbedder> {
        match self {
            EmbeddingProvider::HashNGram => Box::new(HashNGramEmbedder),
            EmbeddingProvider::External(cfg) => Box::new(ExternalEncoder::new(cfg.clone())),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// HTTP client for a remote contextual encoder: `POST {endpoint}/embed`
/// with `{"tokens": [...]}`, answered by `{"vectors": [[...], ...]}`.
pub struct ExternalEncoder {
    url: String,
    agent: ureq::Agent,
}

impl ExternalEncoder {
    pub fn new(config: ExternalEncoderConfig) -> Self {
        ExternalEncoder {
            url: route(&config.endpoint, "/embed"),
            agent: http_agent(Duration::from_millis(config.timeout_ms)),
        }
    }
}

impl TokenEmbedder for ExternalEncoder {
    fn kind(&self) -> &'static str {
        "external"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { tokens })
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let parsed: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if parsed.vectors.len() != tokens.len() {
            return Err(EmbedError::Malformed(format!(
                "expected {} vectors, got {}",
                tokens.len(),
                parsed.vectors.len()
            )));
        }
        let dim = parsed.vectors.first().map_or(0, Vec::len);
        let mut vectors = parsed.vectors;
        for v in &mut vectors {
            if v.len() != dim || dim == 0 || v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::Malformed("ragged or non-finite vectors".into()));
            }
            l2_normalize(v);
        }
        Ok(vectors)
    }
}
