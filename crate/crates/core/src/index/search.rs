use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{analyze_terms, FacetField, InvertedIndex};
use crate::corpus::FacetSnapshot;

/// Facet constraints. Conjunctive across fields, disjunctive within a field;
/// an empty set places no constraint on its field.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSet {
    #[serde(default)]
    pub years: BTreeSet<i32>,
    #[serde(default)]
    pub year_from: Option<i32>,
    #[serde(default)]
    pub year_to: Option<i32>,
    #[serde(default)]
    pub authors: BTreeSet<String>,
    #[serde(default)]
    pub journals: BTreeSet<String>,
    #[serde(default)]
    pub sources: BTreeSet<String>,
}

impl FilterSet {
    pub fn is_empty(&self) -> bool {
        !self.constrains_year()
            && self.authors.is_empty()
            && self.journals.is_empty()
            && self.sources.is_empty()
    }

    fn constrains_year(&self) -> bool {
        !self.years.is_empty() || self.year_from.is_some() || self.year_to.is_some()
    }

    fn year_ok(&self, year: i32) -> bool {
        (self.years.is_empty() || self.years.contains(&year))
            && self.year_from.is_none_or(|from| year >= from)
            && self.year_to.is_none_or(|to| year <= to)
    }

    /// Direct check of one unit's facet snapshot.
    pub fn accepts(&self, facets: &FacetSnapshot) -> bool {
        if self.constrains_year() && !facets.year.is_some_and(|y| self.year_ok(y)) {
            return false;
        }
        if !self.authors.is_empty() && !facets.authors.iter().any(|a| self.authors.contains(a)) {
            return false;
        }
        if !self.journals.is_empty() && !self.journals.contains(facets.journal_value()) {
            return false;
        }
        self.sources.is_empty() || self.sources.contains(&facets.source)
    }

    /// Unit mask built from the index facet maps; `None` when unconstrained.
    fn unit_mask(&self, index: &InvertedIndex) -> Option<Vec<bool>> {
        if self.is_empty() {
            return None;
        }
        let n = index.unit_count();
        let maps = index.facet_maps();
        let mut mask = vec![true; n];
        let mut restrict = |accepted: &mut dyn FnMut(&str) -> bool, field: FacetField| {
            let mut allowed = vec![false; n];
            for (value, ordinals) in maps.field(field) {
                if accepted(value) {
                    for &o in ordinals {
                        allowed[o as usize] = true;
                    }
                }
            }
            for (m, a) in mask.iter_mut().zip(allowed) {
                *m &= a;
            }
        };
        if self.constrains_year() {
            restrict(
                &mut |v| v.parse::<i32>().is_ok_and(|y| self.year_ok(y)),
                FacetField::Year,
            );
        }
        if !self.authors.is_empty() {
            restrict(&mut |v| self.authors.contains(v), FacetField::Authors);
        }
        if !self.journals.is_empty() {
            restrict(&mut |v| self.journals.contains(v), FacetField::Journal);
        }
        if !self.sources.is_empty() {
            restrict(&mut |v| self.sources.contains(v), FacetField::Source);
        }
        Some(mask)
    }
}

/// One first-stage result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub unit_ordinal: u32,
    pub bm25_score: f64,
    pub article_id: String,
    pub paragraph_index: Option<usize>,
}

/// Distinct analyzed query terms with their query frequency, in first-occurrence order.
pub fn query_terms(query: &str) -> Vec<(String, u32)> {
    let mut terms: Vec<(String, u32)> = Vec::new();
    for term in analyze_terms(query) {
        match terms.iter_mut().find(|(t, _)| *t == term) {
            Some((_, qtf)) => *qtf += 1,
            None => terms.push((term, 1)),
        }
    }
    terms
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
pub fn idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated term-frequency component of BM25 for one (term, unit) pair.
pub fn bm25_term_weight(tf: u32, doc_len: u32, avgdl: f64, k1: f64, b: f64) -> f64 {
    let tf = tf as f64;
    let norm = if avgdl > 0.0 {
        1.0 - b + b * doc_len as f64 / avgdl
    } else {
        1.0
    };
    tf * (k1 + 1.0) / (tf + k1 * norm)
}

impl InvertedIndex {
    /// Top-`k` units by BM25, ties broken by ascending unit ordinal.
    pub fn search(&self, query: &str, k: usize, filters: &FilterSet) -> Vec<Hit> {
        let terms = query_terms(query);
        if terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let mask = filters.unit_mask(self);
        let n = self.unit_count();
        let (k1, b, avgdl) = (self.k1(), self.b(), self.avgdl());

        let mut scores = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();
        let mut seen = vec![false; n];
        for (term, qtf) in &terms {
            let Some(postings) = self.postings(term) else {
                continue;
            };
            let term_idf = idf(n, postings.len());
            for p in postings {
                let ord = p.unit as usize;
                if mask.as_ref().is_some_and(|m| !m[ord]) {
                    continue;
                }
                if !seen[ord] {
                    seen[ord] = true;
                    touched.push(p.unit);
                }
                scores[ord] += *qtf as f64
                    * term_idf
                    * bm25_term_weight(p.tf, self.doc_length(p.unit), avgdl, k1, b);
            }
        }

        let mut ranked: Vec<(f64, u32)> = touched.into_iter().map(|o| (scores[o as usize], o)).collect();
        let cmp = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if ranked.len() > k {
            ranked.select_nth_unstable_by(k - 1, cmp);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(cmp);

        ranked
            .into_iter()
            .map(|(score, ordinal)| {
                let unit = self.unit(ordinal);
                Hit {
                    unit_ordinal: ordinal,
                    bm25_score: score,
                    article_id: unit.article_id.clone(),
                    paragraph_index: unit.paragraph_index,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{build_index, IndexConfig};
    use super::*;
    use crate::corpus::GranularityScheme;

    #[test]
    fn higher_tf_ranks_first() {
        let index = cat_dog();
        let hits = index.search("dog", 2, &FilterSet::default());
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].unit_ordinal, 1);
        assert_eq!(hits[1].unit_ordinal, 0);
        assert!(hits[0].bm25_score > hits[1].bm25_score);
    }

    #[test]
    fn hand_computed_score() {
        // N=2, df(dog)=2: idf = ln(1 + 0.5/2.5) = ln 1.2; dl = avgdl so norm = 1.
        let index = cat_dog();
        let hits = index.search("dog", 2, &FilterSet::default());
        let idf = 1.2f64.ln();
        let w = |tf: f64| tf * 1.9 / (tf + 0.9);
        assert!((hits[0].bm25_score - idf * w(2.0)).abs() < 1e-12);
        assert!((hits[1].bm25_score - idf * w(1.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_filter_intersection() {
        let index = cat_dog();
        let filters = FilterSet {
            years: [1999].into(),
            ..Default::default()
        };
        assert!(index.search("cat", 10, &filters).is_empty());
    }

    #[test]
    fn stopword_query_is_empty() {
        assert!(cat_dog().search("the", 10, &FilterSet::default()).is_empty());
    }

    #[test]
    fn repeated_query_term_weighted() {
        let index = cat_dog();
        let once = index.search("cat", 1, &FilterSet::default())[0].bm25_score;
        let twice = index.search("cat cat", 1, &FilterSet::default())[0].bm25_score;
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn k_truncates_with_ordinal_ties() {
        let units = (0..5).map(|i| unit(&format!("u{i}"), &format!("a{i}"), "same text")).collect();
        let index = build_index(units, IndexConfig::new(GranularityScheme::AbstractOnly)).unwrap();
        let hits = index.search("text", 3, &FilterSet::default());
        let ords: Vec<u32> = hits.iter().map(|h| h.unit_ordinal).collect();
        assert_eq!(ords, vec![0, 1, 2]);
    }

    #[test]
    fn filter_semantics() {
        let mut units = Vec::new();
        for (i, (year, journal, source)) in [
            (Some(2019), Some("J1"), "pmc"),
            (Some(2020), None, "biorxiv"),
            (None, Some("J2"), "pmc"),
        ]
        .into_iter()
        .enumerate()
        {
            let mut u = unit(&format!("u{i}"), &format!("a{i}"), "virus");
            u.facets.year = year;
            u.facets.journal = journal.map(String::from);
            u.facets.source = source.into();
            u.facets.authors = vec![format!("author{i}"), "shared".into()];
            units.push(u);
        }
        let index = build_index(units, IndexConfig::new(GranularityScheme::AbstractOnly)).unwrap();
        let ords = |f: FilterSet| -> Vec<u32> {
            let mut v: Vec<u32> = index.search("virus", 10, &f).iter().map(|h| h.unit_ordinal).collect();
            v.sort();
            v
        };
        assert_eq!(ords(FilterSet::default()), vec![0, 1, 2]);
        assert_eq!(
            ords(FilterSet { year_from: Some(2020), ..Default::default() }),
            vec![1]
        );
        assert_eq!(
            ords(FilterSet { sources: ["pmc".to_string(), "biorxiv".to_string()].into(), ..Default::default() }),
            vec![0, 1, 2]
        );
        assert_eq!(
            ords(FilterSet {
                sources: ["pmc".to_string()].into(),
                journals: ["J2".to_string()].into(),
                ..Default::default()
            }),
            vec![2]
        );
        assert_eq!(
            ords(FilterSet { journals: ["unknown".to_string()].into(), ..Default::default() }),
            vec![1]
        );
        assert_eq!(
            ords(FilterSet { authors: ["author0".to_string(), "author2".to_string()].into(), ..Default::default() }),
            vec![0, 2]
        );
    }
}
