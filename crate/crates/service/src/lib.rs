//! HTTP facade over the scoring engine.
//!
//! Request and response bodies are the engine's own JSON documents; the only
//! shape this layer adds is the request envelope of each endpoint and the
//! [`ApiError`] body.

mod error;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method as HttpMethod, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use mqm_core::sqc::{uniform_grid, SamplingPlan};
use mqm_core::{
    find_plan, fit_tolerance_curve, oc_curve, replay, score_sample, select_method, EvaluationSample,
    HistoricalEvaluation, InspectionUnit, MethodSelection, MetricSpec, ModelChoice, ReplayResult, ScoreOptions,
    ScoreReport, ToleranceCurve, TolerancePoint,
};
use mqm_store::{Filter, Kind, Store};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Origins allowed to call the API from a browser; `*` allows any.
    pub cors_origins: Vec<String>,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self { store: Arc::new(store) }
    }
}

/// A metric given inline or by stored id.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MetricRef {
    Id(String),
    Inline(Box<MetricSpec>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    #[serde(default)]
    pub metric_id: Option<String>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    pub sample: EvaluationSample,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub extrapolate: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub points: Vec<TolerancePoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRequest {
    pub history: Vec<HistoricalEvaluation>,
    pub candidates: Vec<MetricRef>,
}

fn default_n_max() -> u64 {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub aql: f64,
    pub rql: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default)]
    pub unit: InspectionUnit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcRequest {
    pub n: u64,
    pub c: u64,
    /// Explicit defect rates; when absent an even grid of `steps` intervals on [0, 1].
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct OcPoint {
    pub p: f64,
    pub pa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRequest {
    pub ewc: u64,
    #[serde(default)]
    pub metric_id: Option<String>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/metrics", get(list_metrics).post(create_metric))
        .route("/metrics/{id}", get(get_metric))
        .route("/score", post(score))
        .route("/route", post(route))
        .route("/calibration/fit", post(fit))
        .route("/calibration/replay", post(replay_history))
        .route("/sampling/plan", post(plan))
        .route("/sampling/oc", post(oc))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

pub fn cors_layer(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([HttpMethod::GET, HttpMethod::POST])
        .allow_headers([header::CONTENT_TYPE]);
    if origins.iter().any(|o| o == "*") {
        layer.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        layer.allow_origin(AllowOrigin::list(list))
    }
}

/// The full application: routes, state and CORS.
pub fn app(store: Store, cors_origins: &[String]) -> Router {
    router(AppState::new(store)).layer(cors_layer(cors_origins))
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let store = Store::open(&config.data_dir).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!(
        "mqm service {VERSION} listening on http://{} (data in {})",
        listener.local_addr()?,
        config.data_dir.display()
    );
    axum::serve(listener, app(store, &config.cors_origins))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs blocking work (fsync, rayon) off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn stored_metric(state: &AppState, id: &str) -> ApiResult<MetricSpec> {
    let entity = state.store.get(Kind::Metric, id)?;
    Ok(MetricSpec::from_json(&entity.body)?)
}

fn resolve(state: &AppState, metric_id: Option<String>, metric: Option<MetricSpec>) -> ApiResult<MetricSpec> {
    let spec = match (metric_id, metric) {
        (Some(id), None) => stored_metric(state, &id)?,
        (None, Some(spec)) => spec,
        _ => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "precondition_failed",
                "give exactly one of `metric_id` and `metric`",
            ))
        }
    };
    spec.validated()?;
    Ok(spec)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: VERSION.into(),
    })
}

async fn create_metric(
    State(state): State<AppState>,
    payload: Result<Json<MetricSpec>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(spec) = payload?;
    spec.validated()?;
    let body = serde_json::to_string(&spec).expect("metric serializes");
    let entity = blocking(move || Ok(state.store.put(Kind::Metric, None, &body)?)).await?;
    let stored = MetricSpec::from_json(&entity.body)?;
    let location = HeaderValue::from_str(&format!("/metrics/{}", entity.id)).ok();
    let mut response = (StatusCode::CREATED, Json(stored)).into_response();
    if let Some(location) = location {
        response.headers_mut().insert(header::LOCATION, location);
    }
    Ok(response)
}

async fn get_metric(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MetricSpec>> {
    stored_metric(&state, &id).map(Json)
}

/// `GET /metrics?key=value...`: stored metrics whose field `key` equals `value`.
async fn list_metrics(
    State(state): State<AppState>,
    query: Result<Query<BTreeMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Vec<MetricSpec>>> {
    let Query(query) = query?;
    let filters: Vec<_> = query.into_iter().map(|(k, v)| Filter::new(k, v)).collect();
    state
        .store
        .list(Kind::Metric, &filters)
        .iter()
        .map(|e| MetricSpec::from_json(&e.body).map_err(ApiError::from))
        .collect::<ApiResult<_>>()
        .map(Json)
}

async fn score(
    State(state): State<AppState>,
    payload: Result<Json<ScoreRequest>, JsonRejection>,
) -> ApiResult<Json<ScoreReport>> {
    let Json(request) = payload?;
    let spec = resolve(&state, request.metric_id, request.metric)?;
    let options = ScoreOptions {
        model: request.model,
        extrapolate: request.extrapolate,
    };
    Ok(Json(score_sample(&request.sample, &spec, options)?))
}

async fn route(
    State(state): State<AppState>,
    payload: Result<Json<RouteRequest>, JsonRejection>,
) -> ApiResult<Json<MethodSelection>> {
    let Json(request) = payload?;
    if request.ewc == 0 {
        return Err(mqm_core::Error::Precondition("ewc must be ≥ 1".into()).into());
    }
    let spec = resolve(&state, request.metric_id, request.metric)?;
    Ok(Json(select_method(request.ewc, &spec)))
}

async fn fit(payload: Result<Json<FitRequest>, JsonRejection>) -> ApiResult<Json<ToleranceCurve>> {
    let Json(request) = payload?;
    Ok(Json(fit_tolerance_curve(&request.points)?))
}

async fn replay_history(
    State(state): State<AppState>,
    payload: Result<Json<ReplayRequest>, JsonRejection>,
) -> ApiResult<Json<Vec<ReplayResult>>> {
    let Json(request) = payload?;
    let candidates = request
        .candidates
        .into_iter()
        .map(|c| match c {
            MetricRef::Id(id) => stored_metric(&state, &id),
            MetricRef::Inline(spec) => Ok(*spec),
        })
        .collect::<ApiResult<Vec<_>>>()?;
    let history = request.history;
    blocking(move || Ok(replay(&history, &candidates)?)).await.map(Json)
}

async fn plan(payload: Result<Json<PlanRequest>, JsonRejection>) -> ApiResult<Json<SamplingPlan>> {
    let Json(r) = payload?;
    blocking(move || Ok(find_plan(r.aql, r.rql, r.alpha, r.beta, r.n_max, r.unit)?))
        .await
        .map(Json)
}

async fn oc(payload: Result<Json<OcRequest>, JsonRejection>) -> ApiResult<Json<Vec<OcPoint>>> {
    let Json(request) = payload?;
    let grid = request
        .grid
        .unwrap_or_else(|| uniform_grid(request.steps.unwrap_or(50)));
    let points = oc_curve(request.n, request.c, &grid)?;
    Ok(Json(points.into_iter().map(|(p, pa)| OcPoint { p, pa }).collect()))
}
