use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use borrowsize::Execution;
use borrowsize_service::store::ScenarioStore;
use borrowsize_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn scenario_json(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scenario.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn app(store: &Path) -> Router {
    router(AppState {
        store: Arc::new(ScenarioStore::open(store).unwrap()),
        mode: Execution::default(),
    })
}

async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn post(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Method::POST, uri, Some(body.to_string())).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn fresh() -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("store.json"));
    (dir, app)
}

#[tokio::test]
async fn health() {
    let (_d, app) = fresh();
    let (status, bytes) = send(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn sample_size_config_a() {
    let (_d, app) = fresh();
    let (status, v) = post(&app, "/v1/sample-size", &scenario_json("config_a")).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["n"], 204);
    assert!(v.get("raw_weight_hazard").is_some());

    let mut body = scenario_json("config_a");
    body["mode"] = json!("frequentist");
    let (_, v) = post(&app, "/v1/sample-size", &body).await;
    assert_eq!(v["n"], 338);
}

#[tokio::test]
async fn linearize_zero_weights() {
    let (_d, app) = fresh();
    let mut body = scenario_json("config_a");
    body["weights"] = json!([0.0, 0.0, 0.0, 0.0, 0.0]);
    let (status, v) = post(&app, "/v1/linearize", &body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["transformed_weights"], json!([0.0, 0.0, 0.0, 0.0, 0.0]));
}

#[tokio::test]
async fn prior_matches_published_mean() {
    let (_d, app) = fresh();
    let (status, v) = post(&app, "/v1/prior", &scenario_json("config_a")).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!((v["mean"].as_f64().unwrap() - 0.1306).abs() < 5e-4, "{v}");
    assert_eq!(v["weight_kind"], "transformed");
}

#[tokio::test]
async fn sweep_rows_and_cap() {
    let (_d, app) = fresh();
    let body = json!({"scenario": scenario_json("config_a"), "axes": ["w1", 3], "step": 0.1});
    let (status, v) = post(&app, "/v1/sweep", &body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["axes"], json!(["w1", "w3"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 121);

    let body = json!({"scenario": scenario_json("config_a"), "axes": ["w1", "w2"], "step": 0.001});
    let (status, v) = post(&app, "/v1/sweep", &body).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{v}");
    assert_eq!(v["error"]["kind"], "too_large");
}

#[tokio::test]
async fn simulate_is_deterministic() {
    let (_d, app) = fresh();
    let body = json!({
        "scenario": scenario_json("config_a"),
        "n": 204,
        "true_mu_delta": 1.0,
        "replicates": 2000,
        "seed": 7
    });
    let (status, a) = send(&app, Method::POST, "/v1/simulate", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = send(&app, Method::POST, "/v1/simulate", Some(body.to_string())).await;
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["replicates"], 2000);

    let mut many = body.clone();
    many["true_mu_delta"] = json!([1.0, 0.0]);
    let (_, v) = post(&app, "/v1/simulate", &many).await;
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn simulate_limits() {
    let (_d, app) = fresh();
    let mut body =
        json!({"scenario": scenario_json("config_a"), "replicates": 2_000_000u64, "seed": 1});
    let (status, _) = post(&app, "/v1/simulate", &body).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);

    body["scenario"]
        .as_object_mut()
        .unwrap()
        .remove("simulation");
    body.as_object_mut().unwrap().remove("seed");
    body["replicates"] = json!(10);
    let (status, v) = post(&app, "/v1/simulate", &body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["fields"][0]["path"], "seed");
}

#[tokio::test]
async fn validation_errors_carry_positions() {
    let (_d, app) = fresh();
    let body = "{\n  \"sources\": [],\n  \"design\": {\"delta\": -1}\n}";
    let (status, bytes) = send(&app, Method::POST, "/v1/sample-size", Some(body.into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    let fields = v["error"]["fields"].as_array().unwrap();
    assert!(
        fields
            .iter()
            .any(|f| f["path"] == "design.delta" && f["line"] == 3),
        "{v}"
    );

    let (status, bytes) = send(
        &app,
        Method::POST,
        "/v1/prior",
        Some("{\"sources\": [".into()),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(v["error"]["fields"][0]["line"].is_number());
}

#[tokio::test]
async fn domain_errors_are_unprocessable() {
    let (_d, app) = fresh();
    let mut body = scenario_json("alzheimers_resolved");
    body.as_object_mut().unwrap().remove("simulation");
    let (status, v) = post(&app, "/v1/linearize", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"]["kind"], "domain");
}

#[tokio::test]
async fn unknown_routes_and_ids() {
    let (_d, app) = fresh();
    let (status, _) = send(&app, Method::GET, "/v1/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, Method::GET, "/v1/scenarios/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, Method::DELETE, "/v1/scenarios/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn crud_round_trip_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let app1 = app(&store);
    let (status, created) = post(&app1, "/v1/scenarios", &scenario_json("config_b")).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap().to_string();
    let uri = format!("/v1/scenarios/{id}");

    let (_, first) = send(&app1, Method::GET, &uri, None).await;
    let record: Value = serde_json::from_slice(&first).unwrap();
    let (status, _) = send(
        &app1,
        Method::PUT,
        &uri,
        Some(record["scenario"].to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = send(&app1, Method::GET, &uri, None).await;
    let second: Value = serde_json::from_slice(&second).unwrap();
    assert_eq!(
        serde_json::to_vec(&record["scenario"]).unwrap(),
        serde_json::to_vec(&second["scenario"]).unwrap()
    );

    let app2 = app(&store);
    let (status, bytes) = send(&app2, Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    let reloaded: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(reloaded, second);
    let (_, list) = send(&app2, Method::GET, "/v1/scenarios", None).await;
    let list: Value = serde_json::from_slice(&list).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (status, _) = send(&app2, Method::DELETE, &uri, None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = send(&app(&store), Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
