//! On-disk index directory.
//!
//! ```text
//! meta.json       format_version, scheme, k1, b, n, avgdl, checksums, ...
//! units.jsonl     one RetrievalUnit per line, in ordinal order
//! articles.jsonl  article table (external JSONL article schema)
//! postings.bin    per term, sorted: u32 term length | term bytes | u32 posting count |
//!                 count x (varint ordinal delta | u32 tf); integers little-endian
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{varint, IndexError, IndexMeta, InvertedIndex, Posting};
use crate::corpus::{Article, GranularityScheme, RetrievalUnit};

pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const UNITS_FILE: &str = "units.jsonl";
const ARTICLES_FILE: &str = "articles.jsonl";
const POSTINGS_FILE: &str = "postings.bin";

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    format_version: u32,
    scheme: GranularityScheme,
    k1: f64,
    b: f64,
    n: usize,
    avgdl: f64,
    vocabulary_size: usize,
    built_at: u64,
    stemming: bool,
    checksums: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn encode_postings(index: &InvertedIndex) -> Vec<u8> {
    let mut buf = Vec::new();
    for (term, postings) in index.terms() {
        buf.extend_from_slice(&(term.len() as u32).to_le_bytes());
        buf.extend_from_slice(term.as_bytes());
        buf.extend_from_slice(&(postings.len() as u32).to_le_bytes());
        let mut prev = 0u32;
        for p in postings {
            varint::encode(p.unit - prev, &mut buf);
            buf.extend_from_slice(&p.tf.to_le_bytes());
            prev = p.unit;
        }
    }
    buf
}

fn read_u32(buf: &[u8], pos: &mut usize) -> Result<u32, IndexError> {
    let bytes = buf
        .get(*pos..*pos + 4)
        .ok_or_else(|| IndexError::Corrupt("truncated postings".into()))?;
    *pos += 4;
    Ok(u32::from_le_bytes(bytes.try_into().unwrap()))
}

fn decode_postings(buf: &[u8], n_units: usize) -> Result<BTreeMap<String, Vec<Posting>>, IndexError> {
    let corrupt = |m: &str| IndexError::Corrupt(m.to_string());
    let mut dictionary = BTreeMap::new();
    let mut pos = 0;
    while pos < buf.len() {
        let len = read_u32(buf, &mut pos)? as usize;
        let term_bytes = buf.get(pos..pos + len).ok_or_else(|| corrupt("truncated term"))?;
        pos += len;
        let term = std::str::from_utf8(term_bytes)
            .map_err(|_| corrupt("term is not UTF-8"))?
            .to_string();
        let count = read_u32(buf, &mut pos)? as usize;
        let mut postings = Vec::with_capacity(count.min(n_units));
        let mut prev = 0u32;
        for i in 0..count {
            let delta = varint::decode(buf, &mut pos).ok_or_else(|| corrupt("bad varint"))?;
            if i > 0 && delta == 0 {
                return Err(corrupt("postings not strictly increasing"));
            }
            let unit = prev
                .checked_add(delta)
                .filter(|&u| (u as usize) < n_units)
                .ok_or_else(|| corrupt("unit ordinal out of range"))?;
            let tf = read_u32(buf, &mut pos)?;
            postings.push(Posting { unit, tf });
            prev = unit;
        }
        if dictionary.insert(term, postings).is_some() {
            return Err(corrupt("duplicate term"));
        }
    }
    Ok(dictionary)
}

/// Write `index` into directory `dir`, creating it if needed.
pub fn save_index(index: &InvertedIndex, dir: impl AsRef<Path>) -> Result<(), IndexError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut units = String::new();
    for unit in index.units() {
        units.push_str(&serde_json::to_string(unit).expect("unit serializes"));
        units.push('\n');
    }
    let mut articles = String::new();
    for article in index.articles() {
        articles.push_str(&article.to_json_line());
        articles.push('\n');
    }
    let postings = encode_postings(index);

    let payloads: [(&str, &[u8]); 3] = [
        (UNITS_FILE, units.as_bytes()),
        (ARTICLES_FILE, articles.as_bytes()),
        (POSTINGS_FILE, &postings),
    ];
    let mut checksums = BTreeMap::new();
    for (name, bytes) in payloads {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        checksums.insert(name.to_string(), sha256_hex(bytes));
    }

    let meta = index.meta();
    let file = MetaFile {
        format_version: meta.format_version,
        scheme: meta.scheme,
        k1: meta.k1,
        b: meta.b,
        n: index.unit_count(),
        avgdl: index.avgdl(),
        vocabulary_size: index.vocabulary_size(),
        built_at: meta.built_at,
        stemming: meta.stemming,
        checksums,
    };
    let path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&file).expect("meta serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

fn read_checked(dir: &Path, name: &str, meta: &MetaFile) -> Result<Vec<u8>, IndexError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(IndexError::MissingFile(path.display().to_string()));
    }
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    match meta.checksums.get(name) {
        Some(expected) if *expected == sha256_hex(&bytes) => Ok(bytes),
        _ => Err(IndexError::Checksum(name.to_string())),
    }
}

/// Load an index directory written by [`save_index`], verifying checksums.
pub fn load_index(dir: impl AsRef<Path>) -> Result<InvertedIndex, IndexError> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(IndexError::MissingFile(meta_path.display().to_string()));
    }
    let meta_bytes = fs::read(&meta_path).map_err(io_err(&meta_path))?;
    let version: serde_json::Value = serde_json::from_slice(&meta_bytes)
        .map_err(|e| IndexError::Corrupt(format!("{META_FILE}: {e}")))?;
    let found = version["format_version"].as_u64().unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let meta: MetaFile = serde_json::from_slice(&meta_bytes)
        .map_err(|e| IndexError::Corrupt(format!("{META_FILE}: {e}")))?;

    let units_bytes = read_checked(dir, UNITS_FILE, &meta)?;
    let articles_bytes = read_checked(dir, ARTICLES_FILE, &meta)?;
    let postings_bytes = read_checked(dir, POSTINGS_FILE, &meta)?;

    let corrupt = |name: &str, e: serde_json::Error| IndexError::Corrupt(format!("{name}: {e}"));
    let units_text = std::str::from_utf8(&units_bytes)
        .map_err(|_| IndexError::Corrupt(format!("{UNITS_FILE} is not UTF-8")))?;
    let units: Vec<RetrievalUnit> = units_text
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| corrupt(UNITS_FILE, e)))
        .collect::<Result<_, _>>()?;
    let articles_text = std::str::from_utf8(&articles_bytes)
        .map_err(|_| IndexError::Corrupt(format!("{ARTICLES_FILE} is not UTF-8")))?;
    let articles: Vec<Article> = articles_text
        .lines()
        .map(|l| Article::from_json_line(l).map_err(|e| corrupt(ARTICLES_FILE, e)))
        .collect::<Result<_, _>>()?;

    if units.len() != meta.n || units.is_empty() {
        return Err(IndexError::Corrupt(format!(
            "meta records {} units but {UNITS_FILE} holds {}",
            meta.n,
            units.len()
        )));
    }
    let dictionary = decode_postings(&postings_bytes, units.len())?;

    let index_meta = IndexMeta {
        format_version: meta.format_version,
        scheme: meta.scheme,
        k1: meta.k1,
        b: meta.b,
        built_at: meta.built_at,
        stemming: meta.stemming,
    };
    let mut index = InvertedIndex::assemble(index_meta, dictionary, units, Vec::new());
    if !articles.is_empty() {
        index.attach_articles(articles)?;
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::cat_dog;
    use super::*;

    #[test]
    fn round_trip_two_units() {
        let dir = tempfile::tempdir().unwrap();
        let index = cat_dog();
        save_index(&index, dir.path()).unwrap();
        let loaded = load_index(dir.path()).unwrap();
        assert_eq!(loaded, index);
        assert_eq!(loaded.postings("dog"), index.postings("dog"));
        assert_eq!(loaded.avgdl(), 2.0);
    }

    #[test]
    fn empty_directory_is_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_index(dir.path()), Err(IndexError::MissingFile(_))));
    }

    #[test]
    fn missing_payload_file() {
        let dir = tempfile::tempdir().unwrap();
        save_index(&cat_dog(), dir.path()).unwrap();
        fs::remove_file(dir.path().join(POSTINGS_FILE)).unwrap();
        assert!(matches!(load_index(dir.path()), Err(IndexError::MissingFile(_))));
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        save_index(&cat_dog(), dir.path()).unwrap();
        let path = dir.path().join(POSTINGS_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_index(dir.path()), Err(IndexError::Checksum(f)) if f == POSTINGS_FILE));
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_index(&cat_dog(), dir.path()).unwrap();
        let path = dir.path().join(META_FILE);
        let text = fs::read_to_string(&path).unwrap().replace(
            &format!("\"format_version\": {FORMAT_VERSION}"),
            "\"format_version\": 99",
        );
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_index(dir.path()),
            Err(IndexError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn postings_layout_is_little_endian_delta_varint() {
        let bytes = encode_postings(&cat_dog());
        // "cat": len 3, "cat", count 1, delta 0, tf 1
        let mut expected = Vec::new();
        expected.extend_from_slice(&3u32.to_le_bytes());
        expected.extend_from_slice(b"cat");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.push(0);
        expected.extend_from_slice(&1u32.to_le_bytes());
        // "dog": count 2, (0, tf 1), (delta 1, tf 2)
        expected.extend_from_slice(&3u32.to_le_bytes());
        expected.extend_from_slice(b"dog");
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.push(0);
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.push(1);
        expected.extend_from_slice(&2u32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn save_is_byte_stable() {
        let index = cat_dog();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_index(&index, d1.path()).unwrap();
        save_index(&load_index(d1.path()).unwrap(), d2.path()).unwrap();
        for name in [META_FILE, UNITS_FILE, ARTICLES_FILE, POSTINGS_FILE] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }
}
