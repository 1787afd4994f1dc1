use serde::{Deserialize, Serialize};

/// Fixed stopword list, lowercase.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzedToken {
    pub term: String,
    /// Index among surviving tokens, from 0.
    pub position: usize,
}

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

/// Lowercased alphanumeric terms with stopwords removed, in text order.
pub fn analyze_terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.to_lowercase()
                .chars()
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && !is_stopword(t))
}

/// Split on any non-alphanumeric character, lowercase, drop stopwords.
pub fn analyze(text: &str) -> Vec<AnalyzedToken> {
    analyze_terms(text)
        .enumerate()
        .map(|(position, term)| AnalyzedToken { term, position })
        .collect()
}
