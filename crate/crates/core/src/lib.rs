//! Multi-stage search over scientific article corpora.
//!
//! Pipeline: paragraph-granularity BM25 retrieval ([`index`]), sliding-window
//! span reranking with pluggable relevance scorers ([`rerank`]), article-level
//! max aggregation with deduplication, unsupervised salient-sentence
//! highlighting ([`highlight`]) and a faceted HTTP search service ([`service`]).

pub mod corpus;
pub mod index;
pub mod highlight;
pub mod rerank;
pub mod service;
pub mod cli;
