//! Side-by-side comparison of the three indexing granularities on a query set.
//!
//! No relevance judgments are involved: the report lists each scheme's top-k
//! articles, their pairwise Jaccard overlap and the mean full-text length of
//! what each scheme retrieves.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, GranularityScheme};
use crate::index::{analyze_terms, build_from_articles, load_index, save_index, FilterSet, IndexConfig, IndexError};
use crate::rerank::dedup_hits;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerScheme<T> {
    pub abstract_only: T,
    pub full_text_monolithic: T,
    pub paragraph_level: T,
}

impl<T> PerScheme<T> {
    pub fn get(&self, scheme: GranularityScheme) -> &T {
        match scheme {
            GranularityScheme::AbstractOnly => &self.abstract_only,
            GranularityScheme::FullTextMonolithic => &self.full_text_monolithic,
            GranularityScheme::ParagraphLevel => &self.paragraph_level,
        }
    }

    fn from_fn(mut f: impl FnMut(GranularityScheme) -> T) -> Self {
        PerScheme {
            abstract_only: f(GranularityScheme::AbstractOnly),
            full_text_monolithic: f(GranularityScheme::FullTextMonolithic),
            paragraph_level: f(GranularityScheme::ParagraphLevel),
        }
    }
}

/// Jaccard overlap of top-k article sets between scheme pairs (a = abstract,
/// b = full text, c = paragraph).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Overlap {
    pub abstract_vs_full_text: f64,
    pub abstract_vs_paragraph: f64,
    pub full_text_vs_paragraph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub query: String,
    pub top_articles: PerScheme<Vec<String>>,
    pub overlap: Overlap,
    pub mean_full_text_length: PerScheme<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityReport {
    pub k: usize,
    pub queries: Vec<QueryComparison>,
    /// Pooled over every retrieved article of every query.
    pub mean_full_text_length: PerScheme<f64>,
}

/// `|A ∩ B| / |A ∪ B|`; two empty sets count as identical.
pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Analyzed token count of title, abstract and every paragraph.
pub fn full_text_length(article: &Article) -> usize {
    [article.title.as_str(), article.abstract_text.as_str()]
        .into_iter()
        .chain(article.paragraphs.iter().map(String::as_str))
        .map(|t| analyze_terms(t).count())
        .sum()
}

fn mean(values: &[usize]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<usize>() as f64 / values.len() as f64
    }
}

/// Build all three schemes (persisted to temporary directories and reloaded),
/// run every query and compare the top-`k` article lists.
pub fn compare_granularity(
    articles: &[Article],
    queries: &[String],
    k: usize,
    config: IndexConfig,
) -> Result<GranularityReport, IndexError> {
    let lengths: HashMap<&str, usize> = articles
        .iter()
        .map(|a| (a.article_id.as_str(), full_text_length(a)))
        .collect();

    let mut indexes = Vec::new();
    for scheme in GranularityScheme::ALL {
        let dir = tempfile::tempdir().map_err(|source| IndexError::Io {
            path: "temporary directory".into(),
            source,
        })?;
        let built = build_from_articles(articles.to_vec(), IndexConfig { scheme, ..config })?;
        save_index(&built, dir.path())?;
        indexes.push((scheme, load_index(dir.path())?));
    }

    let mut pooled: PerScheme<Vec<usize>> = PerScheme::default();
    let mut comparisons = Vec::new();
    for query in queries {
        let top = PerScheme::from_fn(|scheme| {
            let index = &indexes.iter().find(|(s, _)| *s == scheme).unwrap().1;
            let hits = index.search(query, index.unit_count(), &FilterSet::default());
            dedup_hits(&hits)
                .into_iter()
                .take(k)
                .map(|h| h.article_id.clone())
                .collect::<Vec<_>>()
        });
        let lens = PerScheme::from_fn(|scheme| {
            top.get(scheme)
                .iter()
                .map(|id| lengths[id.as_str()])
                .collect::<Vec<_>>()
        });
        pooled.abstract_only.extend(&lens.abstract_only);
        pooled.full_text_monolithic.extend(&lens.full_text_monolithic);
        pooled.paragraph_level.extend(&lens.paragraph_level);
        comparisons.push(QueryComparison {
            query: query.clone(),
            overlap: Overlap {
                abstract_vs_full_text: jaccard(&top.abstract_only, &top.full_text_monolithic),
                abstract_vs_paragraph: jaccard(&top.abstract_only, &top.paragraph_level),
                full_text_vs_paragraph: jaccard(&top.full_text_monolithic, &top.paragraph_level),
            },
            mean_full_text_length: PerScheme::from_fn(|s| mean(lens.get(s))),
            top_articles: top,
        });
    }

    Ok(GranularityReport {
        k,
        queries: comparisons,
        mean_full_text_length: PerScheme::from_fn(|s| mean(pooled.get(s))),
    })
}

/// Queries file: one query per line; blank lines and `#` comments are skipped.
pub fn parse_queries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

impl GranularityReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<32} {:>6} {:>6} {:>6}   {:>9} {:>9} {:>9}\n",
            "query", "J(a,b)", "J(a,c)", "J(b,c)", "len(a)", "len(b)", "len(c)"
        ));
        for q in &self.queries {
            let name: String = q.query.chars().take(32).collect();
            out.push_str(&format!(
                "{:<32} {:>6.3} {:>6.3} {:>6.3}   {:>9.1} {:>9.1} {:>9.1}\n",
                name,
                q.overlap.abstract_vs_full_text,
                q.overlap.abstract_vs_paragraph,
                q.overlap.full_text_vs_paragraph,
                q.mean_full_text_length.abstract_only,
                q.mean_full_text_length.full_text_monolithic,
                q.mean_full_text_length.paragraph_level,
            ));
        }
        out.push_str(&format!(
            "{:<32} {:>6} {:>6} {:>6}   {:>9.1} {:>9.1} {:>9.1}\n",
            "(all)",
            "",
            "",
            "",
            self.mean_full_text_length.abstract_only,
            self.mean_full_text_length.full_text_monolithic,
            self.mean_full_text_length.paragraph_level,
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: &str, abstract_text: &str, paragraphs: Vec<String>) -> Article {
        Article {
            article_id: id.into(),
            title: String::new(),
            abstract_text: abstract_text.into(),
            paragraphs,
            year: None,
            authors: vec![],
            journal: None,
            source: "S".into(),
        }
    }

    #[test]
    fn jaccard_cases() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(jaccard(&s(&["a", "b"]), &s(&["b", "c"])), 1.0 / 3.0);
        assert_eq!(jaccard(&s(&[]), &s(&[])), 1.0);
        assert_eq!(jaccard(&s(&["a"]), &s(&["a"])), 1.0);
    }

    #[test]
    fn single_article_full_overlap() {
        let articles = vec![article("x", "Short note on masks.", vec!["Masks work.".into()])];
        let report = compare_granularity(&articles, &["masks".into()], 5, IndexConfig::new(GranularityScheme::ParagraphLevel)).unwrap();
        let o = report.queries[0].overlap;
        assert_eq!((o.abstract_vs_full_text, o.abstract_vs_paragraph, o.full_text_vs_paragraph), (1.0, 1.0, 1.0));
    }

    #[test]
    fn queries_file_parsing() {
        assert_eq!(parse_queries("# header\n\nmasks\n  incubation period \n#x"), vec!["masks", "incubation period"]);
    }
}
