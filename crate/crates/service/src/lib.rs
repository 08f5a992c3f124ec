//! HTTP facade over the borrowsize library with a file-backed scenario
//! store. Compute routes are pure functions of the request body.

pub mod store;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use borrowsize::design::{prior_warnings, sweep_surface, weight_grid, SampleSizeResult};
use borrowsize::locate::Locator;
use borrowsize::report::{self, PipelineOptions, RawWeightHazard};
use borrowsize::scenario::{FieldError, WeightsInput};
use borrowsize::simulate::MAX_REPLICATES;
use borrowsize::{
    aggregate, linearize_all, AggregationMethod, CollectivePrior, Execution, Scenario, WeightKind,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::store::{ScenarioStore, StoreError};

/// Largest sweep table served in one response.
pub const MAX_SWEEP_ROWS: usize = 100_000;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ScenarioStore>,
    pub mode: Execution,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    fields: Vec<FieldError>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            fields: Vec::new(),
        }
    }

    fn validation(fields: Vec<FieldError>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind: "validation",
            message: "request body failed validation".into(),
            fields,
        }
    }

    fn field(path: &str, message: impl Into<String>) -> Self {
        Self::validation(vec![FieldError {
            path: path.into(),
            message: message.into(),
            line: None,
            column: None,
        }])
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    fn too_large(message: impl Into<String>) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", message)
    }
}

impl From<borrowsize::Error> for ApiError {
    fn from(e: borrowsize::Error) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "domain", e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    message: &'a str,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fields: &'a [FieldError],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "error": ErrorBody { kind: self.kind, message: &self.message, fields: &self.fields }
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parsed JSON body with positions for diagnostics.
struct Body {
    value: Value,
    locator: Locator,
}

impl Body {
    fn parse(bytes: &Bytes) -> ApiResult<Self> {
        let text =
            std::str::from_utf8(bytes).map_err(|_| ApiError::field("", "body is not UTF-8"))?;
        let value: Value = serde_json::from_str(text).map_err(|e| {
            ApiError::validation(vec![FieldError {
                path: String::new(),
                message: format!("malformed JSON: {e}"),
                line: Some(e.line()),
                column: Some(e.column()),
            }])
        })?;
        if !value.is_object() {
            return Err(ApiError::field("", "expected a JSON object"));
        }
        Ok(Self {
            locator: Locator::new(text),
            value,
        })
    }

    fn object(&self) -> &Map<String, Value> {
        self.value.as_object().expect("checked at parse")
    }

    fn scenario_at(&self, key: Option<&str>) -> ApiResult<Scenario> {
        let (value, prefix) = match key {
            None => (&self.value, ""),
            Some(k) => (
                self.object()
                    .get(k)
                    .ok_or_else(|| ApiError::field(k, "missing required field"))?,
                k,
            ),
        };
        Scenario::from_value_at(value, prefix, Some(&self.locator)).map_err(ApiError::validation)
    }

    fn weights(&self) -> ApiResult<WeightsInput> {
        WeightsInput::from_value(&self.value, Some(&self.locator)).map_err(ApiError::validation)
    }

    fn opt<T: for<'de> Deserialize<'de>>(&self, key: &str, expected: &str) -> ApiResult<Option<T>> {
        match self.object().get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|_| ApiError::field(key, format!("expected {expected}"))),
        }
    }

    fn method(&self) -> ApiResult<AggregationMethod> {
        Ok(self
            .opt("method", "\"star\" or \"legacy\"")?
            .unwrap_or(AggregationMethod::Star))
    }
}

fn ok<T: Serialize>(value: &T) -> ApiResult<Response> {
    Ok(Json(serde_json::to_value(value).expect("response serializes")).into_response())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn linearize(bytes: Bytes) -> ApiResult<Response> {
    let input = Body::parse(&bytes)?.weights()?;
    let t = linearize_all(&input.sources, &input.weights, &input.hyper)?;
    ok(&serde_json::json!({ "transformed_weights": t.values() }))
}

#[derive(Serialize)]
struct PriorResponse {
    #[serde(flatten)]
    prior: CollectivePrior,
    precision: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

async fn prior(bytes: Bytes) -> ApiResult<Response> {
    let body = Body::parse(&bytes)?;
    let input = body.weights()?;
    let transform: bool = body.opt("transform", "a boolean")?.unwrap_or(true);
    let method = body.method()?;
    if input.sources.is_empty() {
        return Err(ApiError::field(
            "sources",
            "at least one historical source is required",
        ));
    }
    let weights = if transform && input.weights.kind() == WeightKind::Raw {
        linearize_all(&input.sources, &input.weights, &input.hyper)?
    } else {
        input.weights
    };
    let prior = aggregate(method, &input.sources, &weights, &input.hyper)?;
    ok(&PriorResponse {
        precision: prior.precision(),
        warnings: prior_warnings(&prior),
        prior,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SizeMode {
    Borrow,
    NoBorrow,
    Frequentist,
}

#[derive(Serialize)]
struct SampleSizeResponse {
    #[serde(flatten)]
    result: SampleSizeResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_weight_hazard: Option<RawWeightHazard>,
}

fn pipeline_options(body: &Body, mode: Execution) -> ApiResult<PipelineOptions> {
    Ok(PipelineOptions {
        method: body.method()?,
        skip_transform: body.opt("skip_transform", "a boolean")?.unwrap_or(false),
        mode,
    })
}

async fn sample_size(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let body = Body::parse(&bytes)?;
    let s = body.scenario_at(None)?;
    let opts = pipeline_options(&body, state.mode)?;
    let mode = body
        .opt("mode", "\"borrow\", \"no_borrow\" or \"frequentist\"")?
        .unwrap_or(if s.sources.is_empty() {
            SizeMode::NoBorrow
        } else {
            SizeMode::Borrow
        });
    let (result, hazard) = match mode {
        SizeMode::Frequentist => (report::frequentist_sample_size(&s)?, None),
        SizeMode::NoBorrow => (report::no_borrow_sample_size(&s)?, None),
        SizeMode::Borrow => {
            if s.sources.is_empty() {
                return Err(ApiError::field(
                    "sources",
                    "borrowing needs at least one historical source",
                ));
            }
            (
                report::borrow_sample_size(&s, &opts)?,
                report::raw_weight_hazard(&s)?,
            )
        }
    };
    ok(&SampleSizeResponse {
        result,
        raw_weight_hazard: hazard,
    })
}

fn axis_index(s: &Scenario, v: &Value, k: usize) -> ApiResult<usize> {
    let q = s.sources.len();
    let found = match v {
        Value::Number(n) => n
            .as_u64()
            .map(|n| n as usize)
            .filter(|n| (1..=q).contains(n))
            .map(|n| n - 1),
        Value::String(text) => text
            .strip_prefix('w')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|n| (1..=q).contains(n))
            .map(|n| n - 1)
            .or_else(|| s.sources.iter().position(|src| &src.id == text)),
        _ => None,
    };
    found.ok_or_else(|| {
        ApiError::field(
            &format!("axes[{k}]"),
            format!("expected 1..={q}, \"w1\"..\"w{q}\" or a source id"),
        )
    })
}

async fn sweep(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let body = Body::parse(&bytes)?;
    let s = body.scenario_at(Some("scenario"))?;
    let axes = match body.object().get("axes") {
        Some(Value::Array(xs)) if (1..=2).contains(&xs.len()) => xs
            .iter()
            .enumerate()
            .map(|(k, v)| axis_index(&s, v, k))
            .collect::<ApiResult<Vec<_>>>()?,
        _ => {
            return Err(ApiError::field(
                "axes",
                "expected an array of one or two axes",
            ))
        }
    };
    if axes.len() == 2 && axes[0] == axes[1] {
        return Err(ApiError::field("axes", "the two axes must differ"));
    }
    let step: f64 = body.opt("step", "a number")?.unwrap_or(0.01);
    let points = weight_grid(step)?.len();
    let rows = points.saturating_pow(axes.len() as u32);
    if rows > MAX_SWEEP_ROWS {
        return Err(ApiError::too_large(format!(
            "sweep would produce {rows} rows; the limit is {MAX_SWEEP_ROWS}"
        )));
    }
    let names: Vec<String> = axes.iter().map(|k| format!("w{}", k + 1)).collect();
    let mode = state.mode;
    let table = blocking(move || {
        Ok(sweep_surface(
            &s.historical_sources(),
            &s.weights(),
            &s.hyper,
            &s.design,
            &axes,
            step,
            mode,
        )?)
    })
    .await?;
    ok(&serde_json::json!({ "axes": names, "rows": table }))
}

async fn simulate(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let body = Body::parse(&bytes)?;
    let s = body.scenario_at(Some("scenario"))?;
    let opts = pipeline_options(&body, state.mode)?;
    let spec = s.simulation.clone();
    let seed: u64 = body
        .opt("seed", "a non-negative integer")?
        .or(spec.as_ref().map(|x| x.seed))
        .ok_or_else(|| ApiError::field("seed", "missing required field"))?;
    let replicates: u64 = body
        .opt("replicates", "a positive integer")?
        .or(spec.as_ref().map(|x| x.replicates))
        .unwrap_or(10_000);
    if replicates == 0 {
        return Err(ApiError::field("replicates", "must be at least 1"));
    }
    if replicates > MAX_REPLICATES {
        return Err(ApiError::too_large(format!(
            "{replicates} replicates requested; the limit is {MAX_REPLICATES}"
        )));
    }
    let n: Option<u64> = body
        .opt("n", "a non-negative integer")?
        .or(spec.as_ref().and_then(|x| x.n));
    let (mu, scalar) = match body.object().get("true_mu_delta") {
        None | Some(Value::Null) => (
            spec.map_or_else(|| vec![1.0, 0.0], |x| x.true_mu_delta),
            false,
        ),
        Some(Value::Number(x)) => (vec![x.as_f64().unwrap_or(f64::NAN)], true),
        Some(v) => (
            serde_json::from_value::<Vec<f64>>(v.clone())
                .ok()
                .filter(|xs| !xs.is_empty())
                .ok_or_else(|| {
                    ApiError::field(
                        "true_mu_delta",
                        "expected a number or a non-empty array of numbers",
                    )
                })?,
            false,
        ),
    };
    let results = blocking(move || {
        Ok(report::simulate_scenario(
            &s, &opts, n, &mu, replicates, seed,
        )?)
    })
    .await?;
    if scalar {
        ok(&results[0])
    } else {
        ok(&results)
    }
}

async fn list_scenarios(State(state): State<AppState>) -> ApiResult<Response> {
    ok(&state.store.list())
}

async fn create_scenario(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let s = Body::parse(&bytes)?.scenario_at(None)?;
    let record = state.store.create(s)?;
    let mut response = ok(&record)?;
    *response.status_mut() = StatusCode::CREATED;
    Ok(response)
}

async fn get_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    match state.store.get(&id) {
        Some(r) => ok(&r),
        None => Err(ApiError::not_found(format!("no scenario {id}"))),
    }
}

async fn put_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let s = Body::parse(&bytes)?.scenario_at(None)?;
    match state.store.update(&id, s)? {
        Some(r) => ok(&r),
        None => Err(ApiError::not_found(format!("no scenario {id}"))),
    }
}

async fn delete_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    if state.store.delete(&id)? {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(format!("no scenario {id}")))
    }
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/linearize", post(linearize))
        .route("/v1/prior", post(prior))
        .route("/v1/sample-size", post(sample_size))
        .route("/v1/sweep", post(sweep))
        .route("/v1/simulate", post(simulate))
        .route("/v1/scenarios", get(list_scenarios).post(create_scenario))
        .route(
            "/v1/scenarios/{id}",
            get(get_scenario).put(put_scenario).delete(delete_scenario),
        )
        .fallback(not_found)
        .with_state(state)
}
