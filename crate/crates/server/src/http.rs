//! HTTP API. Every handler runs the blocking service call off the async
//! runtime; errors come back as `{"error": {"code", "message"}}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use lakescope_core::ingest::CatalogQuery;

use crate::error::ServiceError;
use crate::service::Service;
use crate::views::*;

pub const DEFAULT_PORT: u16 = 8646;

#[derive(Serialize)]
struct ErrorEnvelope {
    error: crate::error::ErrorBody,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorEnvelope { error: self.body() })).into_response()
    }
}

type ApiResult<T> = Result<(StatusCode, Json<T>), ServiceError>;

async fn blocking<T, F>(svc: &Arc<Service>, status: StatusCode, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Arc<Service>) -> Result<T, ServiceError> + Send + 'static,
{
    let svc = Arc::clone(svc);
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Internal(format!("request task: {e}")))?
        .map(|v| (status, Json(v)))
}

/// Body extractor whose rejections use the service error envelope.
struct Body<T>(T);

#[axum::async_trait]
impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    S: Send + Sync,
    T: serde::de::DeserializeOwned,
{
    type Rejection = ServiceError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = axum::body::Bytes::from_request(req, state)
            .await
            .map_err(|e| ServiceError::InvalidInput(e.to_string()))?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(bytes)
            .map(Body)
            .map_err(|e| ServiceError::InvalidInput(format!("request body: {e}")))
    }
}

/// Accepts one source or a list of sources.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<IngestRequest>),
    One(IngestRequest),
}

async fn health(State(svc): State<Arc<Service>>) -> ApiResult<Health> {
    blocking(&svc, StatusCode::OK, |s| s.health()).await
}

async fn list_sources(State(svc): State<Arc<Service>>) -> ApiResult<SourceList> {
    blocking(&svc, StatusCode::OK, |s| Ok(s.list_sources())).await
}

async fn add_sources(State(svc): State<Arc<Service>>, Body(body): Body<OneOrMany>) -> ApiResult<IngestResponse> {
    let requests = match body {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![r],
    };
    blocking(&svc, StatusCode::CREATED, move |s| s.ingest(requests)).await
}

async fn add_values(State(svc): State<Arc<Service>>, Body(body): Body<ValuesRequest>) -> ApiResult<lakescope_core::ingest::ValueSketch> {
    blocking(&svc, StatusCode::OK, move |s| s.ingest_values(body)).await
}

async fn list_catalog(
    State(svc): State<Arc<Service>>,
    query: Result<Query<CatalogQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<lakescope_core::ingest::CatalogPage> {
    let Query(query) = query.map_err(|e| ServiceError::InvalidInput(e.to_string()))?;
    blocking(&svc, StatusCode::OK, move |s| s.list_catalog(&query)).await
}

async fn build(State(svc): State<Arc<Service>>, Body(body): Body<BuildRequest>) -> ApiResult<crate::jobs::BuildJob> {
    blocking(&svc, StatusCode::ACCEPTED, move |s| s.start_build(body)).await
}

async fn list_jobs(State(svc): State<Arc<Service>>) -> ApiResult<JobList> {
    blocking(&svc, StatusCode::OK, |s| s.list_jobs()).await
}

async fn job(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<crate::jobs::BuildJob> {
    blocking(&svc, StatusCode::OK, move |s| s.job(&id)).await
}

async fn root(State(svc): State<Arc<Service>>) -> ApiResult<RootResponse> {
    blocking(&svc, StatusCode::OK, |s| s.root()).await
}

async fn node(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<NodeResponse> {
    blocking(&svc, StatusCode::OK, move |s| s.node(&id)).await
}

async fn expand(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Body(body): Body<ExpandRequest>,
) -> ApiResult<ExpandResponse> {
    blocking(&svc, StatusCode::OK, move |s| s.expand(&id, body)).await
}

async fn search(State(svc): State<Arc<Service>>, Body(body): Body<SearchBody>) -> ApiResult<SearchResult> {
    blocking(&svc, StatusCode::OK, move |s| s.search(body)).await
}

async fn list_strategies(State(svc): State<Arc<Service>>) -> ApiResult<StrategyList> {
    blocking(&svc, StatusCode::OK, |s| Ok(s.list_strategies())).await
}

async fn register_strategy(
    State(svc): State<Arc<Service>>,
    Body(body): Body<StrategyRegistration>,
) -> ApiResult<lakescope_core::registry::StrategyDescriptor> {
    blocking(&svc, StatusCode::CREATED, move |s| s.register_strategy(body)).await
}

async fn activate_strategy(
    State(svc): State<Arc<Service>>,
    Path((kind, name)): Path<(String, String)>,
) -> ApiResult<lakescope_core::registry::StrategyDescriptor> {
    blocking(&svc, StatusCode::OK, move |s| s.activate_strategy(&kind, &name)).await
}

async fn fallback() -> ServiceError {
    ServiceError::NotFound("endpoint".into())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sources", get(list_sources).post(add_sources))
        .route("/catalog", get(list_catalog))
        .route("/catalog/values", post(add_values))
        .route("/catalog/build", post(build))
        .route("/catalog/root", get(root))
        .route("/jobs", get(list_jobs))
        .route("/jobs/:id", get(job))
        .route("/nodes/:id", get(node))
        .route("/nodes/:id/expand", post(expand))
        .route("/search", post(search))
        .route("/strategies", get(list_strategies).post(register_strategy))
        .route("/strategies/:kind/:name/activate", post(activate_strategy))
        .fallback(fallback)
        .with_state(service)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down; finishing in-flight requests");
}

/// Binds `addr` and serves until ctrl-c or SIGTERM.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServiceError::PortInUse(addr.port()),
        _ => ServiceError::io(&format!("bind {addr}"), e),
    })?;
    tracing::info!(%addr, data = %service.data_dir().display(), "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| ServiceError::io("server", e))
}
