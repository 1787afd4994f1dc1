//! C ABI over the litdex engine.
//!
//! Conventions:
//! - Every fallible call returns a [`LitdexStatus`]; on failure a message is
//!   available from [`litdex_last_error`] on the same thread.
//! - Strings passed in are NUL-terminated UTF-8. Strings handed out are owned
//!   by the caller and released with [`litdex_string_free`].
//! - An engine handle is immutable after opening and may be shared across
//!   threads; release it once with [`litdex_engine_free`].
//! - Panics never cross the boundary; they surface as `LITDEX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use litdex::corpus::{parse_corpus, CorpusError, GranularityScheme};
use litdex::index::{build_from_articles, load_index, save_index, IndexConfig, IndexError};
use litdex::rerank::relevance_probability;
use litdex::service::{Engine, SearchRequest, SearchResponse, ServiceConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LitdexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Corpus = 4,
    Index = 5,
    Config = 6,
    InvalidRequest = 7,
    NotFound = 8,
    Engine = 9,
    Panic = 10,
}

/// Opaque search engine handle.
pub struct LitdexEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(message).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(LitdexStatus, String);

impl Failure {
    fn new(status: LitdexStatus, message: impl std::fmt::Display) -> Self {
        Failure(status, message.to_string())
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        let status = match e {
            IndexError::Io { .. } | IndexError::MissingFile(_) => LitdexStatus::Io,
            _ => LitdexStatus::Index,
        };
        Failure::new(status, e)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let status = match e {
            CorpusError::Io { .. } => LitdexStatus::Io,
            _ => LitdexStatus::Corpus,
        };
        Failure::new(status, e)
    }
}

/// Run `body`, translating failures and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LitdexStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LitdexStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            LitdexStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` is null or a NUL-terminated string valid for the duration of the call.
unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(LitdexStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure::new(LitdexStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn hand_out(text: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(text).map_err(|e| Failure::new(LitdexStatus::Engine, e))?;
    // SAFETY: callers check `out` for null before producing output.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn require_out<T>(out: *mut T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(LitdexStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Build an index from a JSONL corpus and persist it to `out_dir`.
///
/// `scheme` is `abstract`, `fulltext` or `paragraph`. When `n_units_out` is
/// non-null it receives the number of indexed units.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `n_units_out` must be null
/// or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn litdex_build_index(
    corpus_path: *const c_char,
    scheme: *const c_char,
    out_dir: *const c_char,
    n_units_out: *mut usize,
) -> LitdexStatus {
    guard(|| {
        let corpus_path = read_str(corpus_path, "corpus_path")?;
        let scheme: GranularityScheme = read_str(scheme, "scheme")?
            .parse()
            .map_err(|e| Failure::new(LitdexStatus::InvalidRequest, e))?;
        let out_dir = read_str(out_dir, "out_dir")?;
        let articles = parse_corpus(Path::new(corpus_path))?;
        let index = build_from_articles(articles, IndexConfig::new(scheme))?;
        save_index(&index, Path::new(out_dir))?;
        if !n_units_out.is_null() {
            *n_units_out = index.unit_count();
        }
        Ok(())
    })
}

/// Load a persisted index and open an engine over it.
///
/// `config_toml` may be null for defaults; otherwise it uses the service
/// config keys (scorer, embedder, window, ...). `index_path` and `bind` in it
/// are ignored.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `engine_out` must point
/// to writable memory.
#[no_mangle]
pub unsafe extern "C" fn litdex_engine_open(
    index_dir: *const c_char,
    config_toml: *const c_char,
    engine_out: *mut *mut LitdexEngine,
) -> LitdexStatus {
    guard(|| {
        require_out(engine_out, "engine_out")?;
        *engine_out = ptr::null_mut();
        let index_dir = read_str(index_dir, "index_dir")?;
        let config = if config_toml.is_null() {
            ServiceConfig::default()
        } else {
            let text = read_str(config_toml, "config_toml")?;
            ServiceConfig::from_toml_with_env(text, std::iter::empty())
                .map_err(|e| Failure::new(LitdexStatus::Config, e))?
        };
        let index = load_index(Path::new(index_dir))?;
        let engine = Engine::new(index, config.engine_settings()).map_err(|e| Failure::new(LitdexStatus::Engine, e))?;
        *engine_out = Box::into_raw(Box::new(LitdexEngine { engine }));
        Ok(())
    })
}

/// Release an engine. Null is a no-op.
///
/// # Safety
/// `engine` must come from [`litdex_engine_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn litdex_engine_free(engine: *mut LitdexEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of retrieval units in the engine's index; 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litdex_engine_unit_count(engine: *const LitdexEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.engine.index().unit_count())
}

/// Run a search given a URL query string (`q=...&year_from=...&rerank=...`,
/// the same parameters as `GET /api/search`) and return the response JSON.
///
/// # Safety
/// `engine` must be a live handle; `query_string` NUL-terminated; `json_out`
/// writable. The returned string is freed with [`litdex_string_free`].
#[no_mangle]
pub unsafe extern "C" fn litdex_engine_search(
    engine: *const LitdexEngine,
    query_string: *const c_char,
    json_out: *mut *mut c_char,
) -> LitdexStatus {
    guard(|| {
        require_out(json_out, "json_out")?;
        *json_out = ptr::null_mut();
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure::new(LitdexStatus::NullArgument, "engine is null"))?;
        let query_string = read_str(query_string, "query_string")?;
        let request = SearchRequest::from_query_string(query_string, engine.engine.defaults())
            .map_err(|e| Failure::new(LitdexStatus::InvalidRequest, e))?;
        let response = engine.engine.search(&request);
        let json = serde_json_string(&response)?;
        hand_out(json, json_out)
    })
}

/// Return the stored article record as JSON.
///
/// # Safety
/// Same contract as [`litdex_engine_search`].
#[no_mangle]
pub unsafe extern "C" fn litdex_engine_article(
    engine: *const LitdexEngine,
    article_id: *const c_char,
    json_out: *mut *mut c_char,
) -> LitdexStatus {
    guard(|| {
        require_out(json_out, "json_out")?;
        *json_out = ptr::null_mut();
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure::new(LitdexStatus::NullArgument, "engine is null"))?;
        let article_id = read_str(article_id, "article_id")?;
        let article = engine
            .engine
            .article(article_id)
            .ok_or_else(|| Failure::new(LitdexStatus::NotFound, format!("unknown article {article_id:?}")))?;
        hand_out(article.to_json_line(), json_out)
    })
}

fn serde_json_string(response: &SearchResponse) -> Result<String, Failure> {
    serde_json::to_string(response).map_err(|e| Failure::new(LitdexStatus::Engine, e))
}

/// Probability of relevance from the logits of the "true" and "false" tokens.
#[no_mangle]
pub extern "C" fn litdex_relevance_probability(logit_true: f64, logit_false: f64) -> f64 {
    relevance_probability(logit_true, logit_false)
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn litdex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn litdex_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn litdex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
