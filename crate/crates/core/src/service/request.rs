use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::FilterSet;

pub const MAX_FIRST_STAGE: usize = 10_000;
pub const DEFAULT_K_FIRST_STAGE: usize = 96;
pub const DEFAULT_MAX_RESULTS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RequestError {
    #[error("query parameter q must be non-empty")]
    EmptyQuery,
    #[error("parameter {name}: cannot parse {value:?}")]
    BadValue { name: String, value: String },
    #[error("need 1 <= max_results ({max_results}) <= k ({k}) <= {MAX_FIRST_STAGE}")]
    OutOfRange { max_results: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestDefaults {
    pub k_first_stage: usize,
    pub max_results: usize,
    pub rerank: bool,
}

impl Default for RequestDefaults {
    fn default() -> Self {
        RequestDefaults {
            k_first_stage: DEFAULT_K_FIRST_STAGE,
            max_results: DEFAULT_MAX_RESULTS,
            rerank: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub q: String,
    pub filters: FilterSet,
    pub k_first_stage: usize,
    pub max_results: usize,
    pub rerank: bool,
}

impl SearchRequest {
    pub fn new(q: impl Into<String>, defaults: RequestDefaults) -> Self {
        SearchRequest {
            q: q.into(),
            filters: FilterSet::default(),
            k_first_stage: defaults.k_first_stage,
            max_results: defaults.max_results,
            rerank: defaults.rerank,
        }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.q.trim().is_empty() {
            return Err(RequestError::EmptyQuery);
        }
        let (m, k) = (self.max_results, self.k_first_stage);
        if m < 1 || m > k || k > MAX_FIRST_STAGE {
            return Err(RequestError::OutOfRange { max_results: m, k });
        }
        Ok(())
    }

    /// Parse `/api/search` query parameters. `journal`, `source`, `author` and
    /// `year` may repeat (values within one field are OR-ed). Unknown keys are
    /// ignored. When `k` is absent it is raised to at least `max_results`.
    pub fn from_query_pairs<'a, I>(pairs: I, defaults: RequestDefaults) -> Result<Self, RequestError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        fn num<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, RequestError> {
            value.trim().parse().map_err(|_| RequestError::BadValue {
                name: name.into(),
                value: value.into(),
            })
        }

        let mut req = SearchRequest::new("", defaults);
        let mut k = None;
        for (name, value) in pairs {
            match name {
                "q" => req.q = value.to_string(),
                "year_from" if !value.is_empty() => req.filters.year_from = Some(num(name, value)?),
                "year_to" if !value.is_empty() => req.filters.year_to = Some(num(name, value)?),
                "year" if !value.is_empty() => {
                    req.filters.years.insert(num(name, value)?);
                }
                "journal" if !value.is_empty() => {
                    req.filters.journals.insert(value.to_string());
                }
                "source" if !value.is_empty() => {
                    req.filters.sources.insert(value.to_string());
                }
                "author" if !value.is_empty() => {
                    req.filters.authors.insert(value.to_string());
                }
                "max_results" => req.max_results = num(name, value)?,
                "k" => k = Some(num(name, value)?),
                "rerank" => {
                    req.rerank = match value.to_ascii_lowercase().as_str() {
                        "true" | "1" | "yes" | "on" => true,
                        "false" | "0" | "no" | "off" => false,
                        _ => {
                            return Err(RequestError::BadValue {
                                name: name.into(),
                                value: value.into(),
                            })
                        }
                    }
                }
                _ => {}
            }
        }
        req.k_first_stage = k.unwrap_or(defaults.k_first_stage.max(req.max_results));
        req.validate()?;
        Ok(req)
    }

    /// Parse a raw `a=b&c=d` query string.
    pub fn from_query_string(query: &str, defaults: RequestDefaults) -> Result<Self, RequestError> {
        let pairs: Vec<(String, String)> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        Self::from_query_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())), defaults)
    }

    /// Query string that [`SearchRequest::from_query_string`] parses back to `self`.
    pub fn to_query_string(&self) -> String {
        let mut s = form_urlencoded::Serializer::new(String::new());
        s.append_pair("q", &self.q);
        if let Some(y) = self.filters.year_from {
            s.append_pair("year_from", &y.to_string());
        }
        if let Some(y) = self.filters.year_to {
            s.append_pair("year_to", &y.to_string());
        }
        for y in &self.filters.years {
            s.append_pair("year", &y.to_string());
        }
        for j in &self.filters.journals {
            s.append_pair("journal", j);
        }
        for src in &self.filters.sources {
            s.append_pair("source", src);
        }
        for a in &self.filters.authors {
            s.append_pair("author", a);
        }
        s.append_pair("max_results", &self.max_results.to_string());
        s.append_pair("k", &self.k_first_stage.to_string());
        s.append_pair("rerank", if self.rerank { "true" } else { "false" });
        s.finish()
    }
}
