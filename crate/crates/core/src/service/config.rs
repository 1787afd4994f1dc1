use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::highlight::{EmbeddingProvider, ExternalEncoderConfig, HighlightParams};
use crate::rerank::{ExternalScorerConfig, ScorerKind, WindowConfig};

use super::engine::EngineSettings;
use super::request::RequestDefaults;

/// Prefix of environment variables that override config keys, e.g. `LITDEX_BIND`.
pub const ENV_PREFIX: &str = "LITDEX_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config value for {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerChoice {
    Lexical,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderChoice {
    HashNgram,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub index_path: PathBuf,
    pub bind: String,
    pub scorer: ScorerChoice,
    pub scorer_endpoint: Option<String>,
    pub scorer_timeout_ms: u64,
    pub scorer_batch_size: usize,
    pub target_words: [String; 2],
    pub embedder: EmbedderChoice,
    pub embedder_endpoint: Option<String>,
    pub embedder_timeout_ms: u64,
    pub highlight_k: usize,
    pub max_sentences: usize,
    pub window: usize,
    pub stride: usize,
    pub k_first_stage: usize,
    pub max_results: usize,
    pub rerank: bool,
    pub request_timeout_ms: u64,
    /// Allowed CORS origins; `"*"` allows any.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let defaults = RequestDefaults::default();
        let scorer = ExternalScorerConfig::default();
        ServiceConfig {
            index_path: PathBuf::from("index"),
            bind: "127.0.0.1:8080".into(),
            scorer: ScorerChoice::Lexical,
            scorer_endpoint: None,
            scorer_timeout_ms: scorer.timeout_ms,
            scorer_batch_size: scorer.batch_size,
            target_words: scorer.target_words,
            embedder: EmbedderChoice::HashNgram,
            embedder_endpoint: None,
            embedder_timeout_ms: ExternalEncoderConfig::default().timeout_ms,
            highlight_k: HighlightParams::default().top_k,
            max_sentences: HighlightParams::default().max_sentences,
            window: WindowConfig::default().window,
            stride: WindowConfig::default().stride,
            k_first_stage: defaults.k_first_stage,
            max_results: defaults.max_results,
            rerank: defaults.rerank,
            request_timeout_ms: 30_000,
            cors_origins: vec!["*".into()],
        }
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    // Accept TOML literals (numbers, booleans, arrays); anything else is a string.
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl ServiceConfig {
    /// Parse TOML text, then apply `LITDEX_*` overrides from `env`.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (key, value) in env {
            if let Some(name) = key.strip_prefix(ENV_PREFIX) {
                table.insert(name.to_ascii_lowercase(), parse_env_value(&value));
            }
        }
        let config: ServiceConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scorer == ScorerChoice::External && self.scorer_endpoint.is_none() {
            return Err(ConfigError::Invalid {
                key: "scorer_endpoint",
                message: "required when scorer = \"external\"".into(),
            });
        }
        if self.embedder == EmbedderChoice::External && self.embedder_endpoint.is_none() {
            return Err(ConfigError::Invalid {
                key: "embedder_endpoint",
                message: "required when embedder = \"external\"".into(),
            });
        }
        if self.highlight_k == 0 || self.max_sentences == 0 {
            return Err(ConfigError::Invalid {
                key: "highlight_k",
                message: "highlight_k and max_sentences must be >= 1".into(),
            });
        }
        self.window_config().validate().map_err(|e| ConfigError::Invalid {
            key: "window",
            message: e.to_string(),
        })?;
        let probe = super::request::SearchRequest::new("probe", self.request_defaults());
        probe.validate().map_err(|e| ConfigError::Invalid {
            key: "max_results",
            message: e.to_string(),
        })?;
        Ok(())
    }

    fn window_config(&self) -> WindowConfig {
        WindowConfig {
            window: self.window,
            stride: self.stride,
        }
    }

    pub fn request_defaults(&self) -> RequestDefaults {
        RequestDefaults {
            k_first_stage: self.k_first_stage,
            max_results: self.max_results,
            rerank: self.rerank,
        }
    }

    pub fn engine_settings(&self) -> EngineSettings {
        let scorer = match self.scorer {
            ScorerChoice::Lexical => ScorerKind::Lexical,
            ScorerChoice::External => ScorerKind::External(ExternalScorerConfig {
                endpoint: self.scorer_endpoint.clone().unwrap_or_default(),
                timeout_ms: self.scorer_timeout_ms,
                target_words: self.target_words.clone(),
                batch_size: self.scorer_batch_size,
            }),
        };
        let embedder = match self.embedder {
            EmbedderChoice::HashNgram => EmbeddingProvider::HashNGram,
            EmbedderChoice::External => EmbeddingProvider::External(ExternalEncoderConfig {
                endpoint: self.embedder_endpoint.clone().unwrap_or_default(),
                timeout_ms: self.embedder_timeout_ms,
            }),
        };
        EngineSettings {
            scorer,
            embedder,
            window: self.window_config(),
            highlight: HighlightParams {
                top_k: self.highlight_k,
                max_sentences: self.max_sentences,
            },
            defaults: self.request_defaults(),
        }
    }
}
