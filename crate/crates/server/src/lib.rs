//! HTTP service for the tagmill annotation platform.
//!
//! Every route requires `Authorization: Bearer <token>`. Tokens map to an
//! identity with a role; annotators may lease and submit their own tasks and
//! read datasets, everything else is for managers.

pub mod config;
pub mod error;
mod routes;

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::Router;
use tagmill_core::model::{Annotator, AnnotatorKind};
use tagmill_core::Platform;
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

pub use config::{Role, ServerConfig, TokenEntry};
pub use error::{ApiError, ApiResult};

/// The authenticated caller of a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub id: String,
    pub role: Role,
    pub kind: AnnotatorKind,
}

impl Identity {
    pub fn is_manager(&self) -> bool {
        self.role == Role::Manager
    }

    pub fn require_manager(&self) -> ApiResult<()> {
        if self.is_manager() {
            Ok(())
        } else {
            Err(ApiError::Forbidden(format!("{} is not a manager", self.id)))
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
    tokens: Arc<HashMap<String, Identity>>,
}

impl AppState {
    /// Registers every token identity as an annotator so its id can appear
    /// on tasks and judgments.
    pub fn new(platform: Arc<Platform>, tokens: &[TokenEntry]) -> tagmill_core::Result<Self> {
        let mut map = HashMap::new();
        for t in tokens {
            platform.upsert_annotator(Annotator {
                id: t.id.clone(),
                display_name: t.display_name.clone().unwrap_or_else(|| t.id.clone()),
                kind: t.kind,
            })?;
            map.insert(t.token.clone(), Identity { id: t.id.clone(), role: t.role, kind: t.kind });
        }
        Ok(Self { platform, tokens: Arc::new(map) })
    }

    fn identify(&self, header: Option<&HeaderValue>) -> Option<Identity> {
        let value = header?.to_str().ok()?;
        let token = value.strip_prefix("Bearer ").or_else(|| value.strip_prefix("bearer "))?;
        self.tokens.get(token.trim()).cloned()
    }

    /// Runs a blocking platform call off the async executor.
    pub(crate) async fn run<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&Platform) -> tagmill_core::Result<T> + Send + 'static,
    {
        let platform = self.platform.clone();
        tokio::task::spawn_blocking(move || f(&platform))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(ApiError::from)
    }
}

async fn authenticate(State(state): State<AppState>, mut req: Request, next: Next) -> Result<Response, ApiError> {
    let identity = state.identify(req.headers().get(header::AUTHORIZATION)).ok_or(ApiError::Unauthorized)?;
    req.extensions_mut().insert(identity);
    Ok(next.run(req).await)
}

/// The router without CORS.
pub fn app(state: AppState) -> Router {
    routes::router()
        .layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

/// The router with a CORS allowlist. An empty list disables cross-origin access.
pub fn app_with_cors(state: AppState, origins: &[String]) -> Router {
    let app = app(state);
    if origins.is_empty() {
        return app;
    }
    let origins: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    let cors = CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    app.layer(cors)
}
