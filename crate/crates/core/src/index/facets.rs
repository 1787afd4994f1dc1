use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Hit, InvertedIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetField {
    Year,
    Authors,
    Journal,
    Source,
}

impl FacetField {
    pub const ALL: [FacetField; 4] = [
        FacetField::Year,
        FacetField::Authors,
        FacetField::Journal,
        FacetField::Source,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FacetField::Year => "year",
            FacetField::Authors => "authors",
            FacetField::Journal => "journal",
            FacetField::Source => "source",
        }
    }
}

impl fmt::Display for FacetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetValueCount {
    pub value: String,
    pub count: usize,
}

/// Per-field value counts over distinct articles, sorted by count descending
/// then value ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetCounts {
    pub year: Vec<FacetValueCount>,
    pub authors: Vec<FacetValueCount>,
    pub journal: Vec<FacetValueCount>,
    pub source: Vec<FacetValueCount>,
}

impl FacetCounts {
    pub fn field(&self, field: FacetField) -> &[FacetValueCount] {
        match field {
            FacetField::Year => &self.year,
            FacetField::Authors => &self.authors,
            FacetField::Journal => &self.journal,
            FacetField::Source => &self.source,
        }
    }

    pub fn is_empty(&self) -> bool {
        FacetField::ALL.iter().all(|f| self.field(*f).is_empty())
    }
}

fn sorted(counts: BTreeMap<String, usize>) -> Vec<FacetValueCount> {
    let mut out: Vec<FacetValueCount> = counts
        .into_iter()
        .map(|(value, count)| FacetValueCount { value, count })
        .collect();
    // BTreeMap order already gives value-ascending; the stable sort keeps it within equal counts.
    out.sort_by(|a, b| b.count.cmp(&a.count));
    out
}

/// Count distinct articles among `hits` per facet value.
pub fn compute_facets(index: &InvertedIndex, hits: &[Hit]) -> FacetCounts {
    let mut seen = BTreeSet::new();
    let mut year = BTreeMap::new();
    let mut authors = BTreeMap::new();
    let mut journal = BTreeMap::new();
    let mut source = BTreeMap::new();

    for hit in hits {
        if !seen.insert(hit.article_id.as_str()) {
            continue;
        }
        let f = index.unit_facets(hit.unit_ordinal);
        *year.entry(f.year_value()).or_insert(0) += 1;
        let distinct: BTreeSet<&String> = f.authors.iter().collect();
        for author in distinct {
            *authors.entry(author.clone()).or_insert(0) += 1;
        }
        *journal.entry(f.journal_value().to_string()).or_insert(0) += 1;
        *source.entry(f.source.clone()).or_insert(0) += 1;
    }

    FacetCounts {
        year: sorted(year),
        authors: sorted(authors),
        journal: sorted(journal),
        source: sorted(source),
    }
}
