//! HTTP search service.
//!
//! Routes:
//! - `GET /api/search?q=&year_from=&year_to=&journal=&source=&author=&max_results=&rerank=&k=`
//! - `GET /api/article/{id}`
//! - `GET /healthz`
//!
//! The index is loaded after the listener is bound; until then every route
//! answers 503.

mod config;
mod engine;
mod request;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use axum::extract::{Path, RawQuery, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use config::{ConfigError, EmbedderChoice, ScorerChoice, ServiceConfig, ENV_PREFIX};
pub use engine::{
    Engine, EngineError, EngineSettings, HighlightRange, SearchResponse, SearchResult, Timing,
};
pub use request::{
    RequestDefaults, RequestError, SearchRequest, DEFAULT_K_FIRST_STAGE, DEFAULT_MAX_RESULTS,
    MAX_FIRST_STAGE,
};

use crate::index::{load_index, IndexError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot load index {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: IndexError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("server error: {0}")]
    Server(#[from] std::io::Error),
}

pub struct AppState {
    engine: OnceLock<Arc<Engine>>,
    started: Instant,
    request_timeout: Duration,
    requests: AtomicU64,
}

impl AppState {
    /// State whose index is still loading.
    pub fn loading(request_timeout: Duration) -> Arc<Self> {
        Arc::new(AppState {
            engine: OnceLock::new(),
            started: Instant::now(),
            request_timeout,
            requests: AtomicU64::new(0),
        })
    }

    pub fn ready(engine: Engine) -> Arc<Self> {
        let state = Self::loading(Duration::from_secs(30));
        state.set_engine(engine);
        state
    }

    pub fn set_engine(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<&Arc<Engine>> {
        self.engine.get()
    }

    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

fn error_body(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_ready() -> Response {
    error_body(StatusCode::SERVICE_UNAVAILABLE, "index is loading")
}

async fn search_handler(State(state): State<Arc<AppState>>, RawQuery(query): RawQuery) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    let Some(engine) = state.engine().cloned() else {
        return not_ready();
    };
    let request = match SearchRequest::from_query_string(query.as_deref().unwrap_or(""), engine.defaults()) {
        Ok(r) => r,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let work = tokio::task::spawn_blocking(move || engine.search(&request));
    match tokio::time::timeout(state.request_timeout, work).await {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => error_body(StatusCode::INTERNAL_SERVER_ERROR, format!("search failed: {e}")),
        Err(_) => error_body(StatusCode::GATEWAY_TIMEOUT, "search timed out"),
    }
}

async fn article_handler(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    let Some(engine) = state.engine() else {
        return not_ready();
    };
    match engine.article(&id) {
        Some(article) => Json(article.to_json_value()).into_response(),
        None => error_body(StatusCode::NOT_FOUND, format!("unknown article {id:?}")),
    }
}

async fn health_handler(State(state): State<Arc<AppState>>) -> Response {
    let uptime_s = state.started.elapsed().as_secs_f64();
    match state.engine() {
        Some(engine) => {
            let index = engine.index();
            Json(json!({
                "status": "ok",
                "n": index.unit_count(),
                "articles": index.articles().len(),
                "scheme": index.scheme().as_str(),
                "scorer": engine.settings().scorer.name(),
                "embedder": engine.settings().embedder.name(),
                "uptime_s": uptime_s,
            }))
            .into_response()
        }
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading", "uptime_s": uptime_s })),
        )
            .into_response(),
    }
}

fn cors_layer(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() || origins.iter().any(|o| o == "*") {
        layer.allow_origin(Any)
    } else {
        let values: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
        layer.allow_origin(AllowOrigin::list(values))
    }
}

pub fn router(state: Arc<AppState>, cors_origins: &[String]) -> Router {
    Router::new()
        .route("/api/search", get(search_handler))
        .route("/api/article/{id}", get(article_handler))
        .route("/healthz", get(health_handler))
        .layer(cors_layer(cors_origins))
        .with_state(state)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

/// Bind, load the index in the background and serve until SIGINT/SIGTERM.
/// In-flight requests are drained before returning.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    let local: SocketAddr = listener.local_addr()?;
    tracing::info!(%local, "listening");

    let state = AppState::loading(Duration::from_millis(config.request_timeout_ms));
    let app = router(state.clone(), &config.cors_origins);

    let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<ServeError>();
    let loader_state = state.clone();
    let loader_config = config.clone();
    tokio::task::spawn_blocking(move || {
        let path = loader_config.index_path.clone();
        let result = load_index(&path)
            .map_err(|source| ServeError::Load { path, source })
            .and_then(|index| Ok(Engine::new(index, loader_config.engine_settings())?));
        match result {
            Ok(engine) => {
                tracing::info!(units = engine.index().unit_count(), "index loaded");
                loader_state.set_engine(engine);
            }
            Err(e) => {
                let _ = fail_tx.send(e);
            }
        }
    });

    let failure: Arc<std::sync::Mutex<Option<ServeError>>> = Arc::default();
    let failure_slot = failure.clone();
    let shutdown = async move {
        tokio::select! {
            _ = shutdown_signal() => {}
            Ok(err) = fail_rx => {
                *failure_slot.lock().unwrap() = Some(err);
            }
        }
    };
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    let failed = failure.lock().unwrap().take();
    match failed {
        Some(err) => Err(err),
        None => Ok(()),
    }
}
