//! Synthetic corpora and independent brute-force oracles shared by the
//! integration tests. Nothing here calls into the code under test except to
//! read plain data (articles, units, constants).

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use litdex::corpus::Article;
use litdex::index::STOPWORDS;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub const VOCAB: &[&str] = &[
    "virus", "coronavirus", "protein", "spike", "receptor", "binding", "cell", "infection",
    "patients", "clinical", "mortality", "incubation", "period", "transmission", "droplet",
    "masks", "vaccine", "antibody", "response", "immune", "lung", "fever", "cough", "symptom",
    "hospital", "treatment", "drug", "trial", "model", "epidemic", "outbreak", "cases",
    "children", "elderly", "risk", "factor", "sequence", "genome", "mutation", "strain", "bat",
    "host", "animal", "zoonotic", "surveillance", "testing", "pcr", "serology", "cohort",
    "study", "analysis", "data", "rate", "estimate", "season", "influenza", "sars", "mers",
    "china", "wuhan",
];

pub const JOURNALS: &[&str] = &["Lancet", "Nature", "Cell", "JAMA", "Virology J"];
pub const SOURCES: &[&str] = &["pmc", "medline", "biorxiv", "who"];
pub const AUTHORS: &[&str] = &[
    "Lee, K.", "Smith, J.", "Wang, L.", "Garcia, M.", "Chen, Y.", "Okafor, C.", "Novak, P.",
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Zipf-ish word choice so that document frequencies vary.
pub fn word(rng: &mut StdRng) -> &'static str {
    let r: f64 = rng.random();
    let i = ((VOCAB.len() as f64) * r * r) as usize;
    VOCAB[i.min(VOCAB.len() - 1)]
}

pub fn sentence(rng: &mut StdRng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    let mut words: Vec<String> = (0..n).map(|_| word(rng).to_string()).collect();
    if rng.random_bool(0.2) {
        words.insert(rng.random_range(0..=words.len()), "the".into());
    }
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

pub fn paragraph(rng: &mut StdRng, max_sentences: usize) -> String {
    let n = rng.random_range(1..=max_sentences);
    (0..n).map(|_| sentence(rng, 3, 12)).collect::<Vec<_>>().join(" ")
}

pub fn article(rng: &mut StdRng, id: &str, n_paragraphs: usize) -> Article {
    let n_authors = rng.random_range(0..=3);
    let mut authors: Vec<String> = (0..n_authors).map(|_| AUTHORS.choose(rng).unwrap().to_string()).collect();
    if rng.random_bool(0.1) && !authors.is_empty() {
        authors.push(authors[0].clone());
    }
    Article {
        article_id: id.to_string(),
        title: sentence(rng, 2, 6),
        abstract_text: paragraph(rng, 3),
        paragraphs: (0..n_paragraphs).map(|_| paragraph(rng, 6)).collect(),
        year: if rng.random_bool(0.85) { Some(rng.random_range(2002..=2021)) } else { None },
        authors,
        journal: if rng.random_bool(0.8) {
            Some(JOURNALS.choose(rng).unwrap().to_string())
        } else {
            None
        },
        source: SOURCES.choose(rng).unwrap().to_string(),
    }
}

pub fn corpus(seed: u64, n_articles: usize, max_paragraphs: usize) -> Vec<Article> {
    let mut r = rng(seed);
    (0..n_articles)
        .map(|i| {
            let n = r.random_range(0..=max_paragraphs);
            article(&mut r, &format!("art{i:05}"), n)
        })
        .collect()
}

pub fn query(rng: &mut StdRng, max_terms: usize) -> String {
    let n = rng.random_range(1..=max_terms);
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

pub fn write_corpus(path: &std::path::Path, articles: &[Article]) {
    let body: String = articles.iter().map(|a| a.to_json_line() + "\n").collect();
    std::fs::write(path, body).unwrap();
}

// ---------------------------------------------------------------- oracles

/// Tokenizer written from the contract: split on non-alphanumerics, lowercase,
/// drop stopwords.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            let t: String = cur.chars().filter(|c| c.is_alphanumeric()).collect();
            if !t.is_empty() && !STOPWORDS.contains(&t.as_str()) {
                out.push(t);
            }
            cur.clear();
        }
    }
    out
}

/// Loops over every unit with the textbook BM25 formula. Returns
/// `(ordinal, score)` sorted by score descending, ordinal ascending, units
/// with no matching term excluded.
pub fn brute_bm25(texts: &[String], query: &str, k1: f64, b: f64) -> Vec<(u32, f64)> {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| oracle_tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut q: Vec<(String, f64)> = Vec::new();
    for t in oracle_tokens(query) {
        match q.iter_mut().find(|(x, _)| *x == t) {
            Some((_, c)) => *c += 1.0,
            None => q.push((t, 1.0)),
        }
    }
    let mut out = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let mut score = 0.0;
        let mut matched = false;
        for (term, qtf) in &q {
            let tf = d.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = docs.iter().filter(|x| x.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = if avgdl > 0.0 { 1.0 - b + b * d.len() as f64 / avgdl } else { 1.0 };
            score += qtf * idf * (tf * (k1 + 1.0) / (tf + k1 * norm));
        }
        if matched {
            out.push((i as u32, score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// Group-by over the distinct hit articles.
pub fn brute_facets(articles: &[&Article]) -> BTreeMap<&'static str, Vec<(String, usize)>> {
    let mut year: HashMap<String, usize> = HashMap::new();
    let mut authors: HashMap<String, usize> = HashMap::new();
    let mut journal: HashMap<String, usize> = HashMap::new();
    let mut source: HashMap<String, usize> = HashMap::new();
    for a in articles {
        *year.entry(a.year.map_or("unknown".into(), |y| y.to_string())).or_default() += 1;
        for au in a.authors.iter().collect::<BTreeSet<_>>() {
            *authors.entry(au.clone()).or_default() += 1;
        }
        *journal.entry(a.journal.clone().unwrap_or_else(|| "unknown".into())).or_default() += 1;
        *source.entry(a.source.clone()).or_default() += 1;
    }
    let order = |m: HashMap<String, usize>| {
        let mut v: Vec<(String, usize)> = m.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    };
    BTreeMap::from([
        ("year", order(year)),
        ("authors", order(authors)),
        ("journal", order(journal)),
        ("source", order(source)),
    ])
}

/// Window enumeration from the stop rule, written as a closed form.
pub fn closed_form_windows(n: usize, w: usize, s: usize) -> Vec<(usize, usize)> {
    let count = if n <= w { 1 } else { (n - w).div_ceil(s) + 1 };
    (0..count).map(|i| (i * s, (i * s + w).min(n))).collect()
}

/// Hash n-gram embedding rebuilt from the contract: n-grams of orders 3..=5
/// over `^token$`, FNV-1a 64 then one splitmix64 step, bit i gives the sign of
/// dimension i, sum and L2-normalize.
pub fn oracle_embed(token: &str) -> Vec<f64> {
    let chars: Vec<char> = format!("^{token}$").chars().collect();
    let mut v = [0i64; 64];
    for n in 3..=5 {
        if chars.len() < n {
            continue;
        }
        for i in 0..=chars.len() - n {
            let gram: String = chars[i..i + n].iter().collect();
            let mut h: u64 = 14695981039346656037;
            for byte in gram.bytes() {
                h = (h ^ byte as u64).wrapping_mul(1099511628211);
            }
            let mut z = h.wrapping_add(0x9E3779B97F4A7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            for (d, x) in v.iter_mut().enumerate() {
                *x += if z >> d & 1 == 1 { 1 } else { -1 };
            }
        }
    }
    let norm = (v.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
    v.iter().map(|&x| if norm > 0.0 { x as f64 / norm } else { 0.0 }).collect()
}

pub fn oracle_ngrams(token: &str) -> BTreeSet<String> {
    let chars: Vec<char> = format!("^{token}$").chars().collect();
    let mut out = BTreeSet::new();
    for n in 3..=5 {
        for w in chars.windows(n) {
            out.insert(w.iter().collect());
        }
    }
    out
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Percentile by nearest rank.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}
