mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use brain_core::netcore::io::{self, NetworkDoc};
use brain_core::resilience::{predicted_delta_s, PercolationOptions};
use brain_engine::api::{self, Handle, TOKEN_HEADER};
use brain_engine::store::{read_log, LOG_FILE};
use brain_engine::{replay, Engine, EngineConfig, Mode};
use common::{hub_config, HUB_TICK};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn start(cfg: EngineConfig) -> (Handle, Router) {
    let h = api::spawn(Engine::new(cfg).unwrap());
    let r = api::router(h.clone());
    (h, r)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(TOKEN_HEADER, t);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, None, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body), None).await
}

async fn run(h: &Handle, ticks: u64) {
    for _ in 0..ticks {
        h.tick().await.unwrap();
    }
}

#[tokio::test]
async fn health_reports_version_and_tick() {
    let (h, app) = start(hub_config(100, Mode::Supervised));
    run(&h, 3).await;
    let (s, v) = get(&app, "/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["version"], api::API_VERSION);
    assert_eq!(v["data"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["data"]["tick"], 3);
    assert_eq!(v["data"]["phase"], "idle");
}

#[tokio::test]
async fn network_round_trips_the_loaded_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let cfg = hub_config(80, Mode::Supervised);
    let net = brain_engine::load_network(&cfg).unwrap();
    io::write_file(&net, &path).unwrap();
    let mut cfg = cfg;
    cfg.network = Some(path.clone());
    let (_h, app) = start(cfg);
    let (s, v) = get(&app, "/network").await;
    assert_eq!(s, StatusCode::OK);
    let served: NetworkDoc = serde_json::from_value(v["data"].clone()).unwrap();
    let file: NetworkDoc = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(served, file);
    assert_eq!(brain_core::netcore::MultilayerNetwork::try_from(served).unwrap(), net);
}

#[tokio::test]
async fn state_alerts_plans_and_reports_follow_the_loop() {
    let (h, app) = start(hub_config(120, Mode::Supervised));
    run(&h, HUB_TICK).await;
    let (_, st) = get(&app, "/state").await;
    let d = &st["data"];
    assert_eq!(d["tick"], HUB_TICK);
    assert_eq!(d["mode"], "supervised");
    assert_eq!(d["pending_plans"], json!([format!("plan-{HUB_TICK}")]));
    assert_eq!(d["active_alerts"].as_array().unwrap().len(), 1);

    let (_, alerts) = get(&app, "/alerts?active=true").await;
    let a = &alerts["data"][0];
    assert_eq!(a["id"], format!("alert-{HUB_TICK}"));
    assert_eq!(a["event_graph"], format!("eg-{HUB_TICK}"));
    assert!(a["z"].as_f64().unwrap() > 3.0);
    let (_, none) = get(&app, "/alerts?active=false").await;
    assert!(none["data"].as_array().unwrap().is_empty());

    let (_, plans) = get(&app, "/plans").await;
    let p = &plans["data"][0];
    assert_eq!(p["plan_id"], format!("plan-{HUB_TICK}"));
    assert_eq!(p["status"], "proposed");
    assert!(!p["candidates"].as_array().unwrap().is_empty());
    let (_, proposed) = get(&app, "/plans?status=proposed").await;
    assert_eq!(proposed["data"].as_array().unwrap().len(), 1);

    let (s, rep) = get(&app, &format!("/reports/{HUB_TICK}")).await;
    assert_eq!(s, StatusCode::OK);
    let state = h.state();
    let expected = serde_json::to_value(&state.reports[&HUB_TICK]).unwrap();
    assert_eq!(rep["data"], expected);
    assert_eq!(rep["data"]["alert"], format!("alert-{HUB_TICK}"));
    let (s, err) = get(&app, "/reports/9999").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["version"], api::API_VERSION);
}

#[tokio::test]
async fn approval_flow_over_http() {
    let (h, app) = start(hub_config(120, Mode::Supervised));
    run(&h, HUB_TICK).await;
    let id = format!("plan-{HUB_TICK}");
    let uri = format!("/plans/{id}/approve");

    let (s, _) = post(&app, &uri, json!({ "candidate": "nope" })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, v) = post(&app, &uri, json!({ "note": "go" })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["data"]["ack"], "applied");
    assert_eq!(v["data"]["plan"]["status"], "approved");
    let (s, v) = post(&app, &uri, json!({})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["data"]["ack"], "unchanged");

    h.tick().await.unwrap();
    let (_, st) = get(&app, "/state").await;
    assert_eq!(st["data"]["executed"][0]["plan_id"], id);
    let (_, plans) = get(&app, "/plans").await;
    assert_eq!(plans["data"][0]["status"], "executed");

    let (s, _) = post(&app, &format!("/plans/{id}/reject"), json!({ "reason": "late" })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = post(&app, "/plans/plan-0/approve", json!({})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn reject_then_approve_conflicts() {
    let (h, app) = start(hub_config(120, Mode::Supervised));
    run(&h, HUB_TICK).await;
    let id = format!("plan-{HUB_TICK}");
    let (s, v) = call(&app, "POST", &format!("/plans/{id}/reject"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["data"]["plan"]["status"], "rejected");
    let (s, _) = post(&app, &format!("/plans/{id}/approve"), json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = post(&app, &format!("/plans/{id}/reject"), json!({ "reason": "x" })).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn whatif_matches_direct_call_and_leaves_state_alone() {
    let cfg = hub_config(120, Mode::Supervised);
    let occupation = cfg.decide.occupation;
    let (h, app) = start(cfg);
    run(&h, 2).await;
    let before = h.state();
    let body = json!({ "action": "remove_nodes", "nodes": [{ "layer": 0, "node": 3 }, { "layer": 1, "node": 7 }] });
    let (s, v) = post(&app, "/whatif", body.clone()).await;
    assert_eq!(s, StatusCode::OK);
    let action = serde_json::from_value(body).unwrap();
    let net = before.network.as_ref().unwrap();
    let direct = predicted_delta_s(net, &action, &[occupation; 2], PercolationOptions::default()).unwrap();
    assert_eq!(v["data"]["delta_s"].as_f64().unwrap(), direct);
    assert_eq!(v["data"]["sweep"].as_array().unwrap().len(), 11);
    assert_eq!(*h.state(), *before);

    let (s, _) = post(
        &app,
        "/whatif",
        json!({ "action": "remove_nodes", "nodes": [{ "layer": 5, "node": 0 }] }),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = post(&app, "/whatif", json!({ "action": "explode" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(
        &app,
        "/whatif",
        json!({ "action": "scale_weights", "factor": 0.5, "occupation": 2.0 }),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn token_guards_mutations() {
    let mut cfg = hub_config(100, Mode::Supervised);
    cfg.api_token = Some("s3cret".into());
    let (h, app) = start(cfg);
    run(&h, HUB_TICK).await;
    let uri = format!("/plans/plan-{HUB_TICK}/approve");
    let (s, _) = call(&app, "POST", &uri, Some(json!({})), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call(&app, "POST", &uri, Some(json!({})), Some("wrong")).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call(&app, "POST", &uri, Some(json!({})), Some("s3cret")).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = get(&app, "/state").await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn events_stream_pushes_log_records() {
    let (h, app) = start(hub_config(80, Mode::Supervised));
    let resp = app
        .clone()
        .oneshot(Request::get("/events").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    h.tick().await.unwrap();
    let mut text = String::new();
    while !text.contains("event: tick_completed") {
        let frame = tokio::time::timeout(std::time::Duration::from_secs(10), body.frame())
            .await
            .expect("event in time")
            .unwrap()
            .unwrap();
        if let Ok(data) = frame.into_data() {
            text.push_str(std::str::from_utf8(&data).unwrap());
        }
    }
    assert!(text.starts_with("event: hello"));
    for kind in ["tick_started", "observed", "oriented", "decided", "tick_completed"] {
        assert!(text.contains(&format!("event: {kind}")), "{kind} missing");
    }
}

#[tokio::test]
async fn shutdown_flushes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hub_config(80, Mode::Supervised);
    cfg.data_dir = dir.path().to_path_buf();
    let h = api::spawn(Engine::open(cfg).unwrap());
    run(&h, 5).await;
    h.shutdown().await.unwrap();
    let records = read_log(&dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(replay(&records).unwrap(), *h.state());
    assert!(h.tick().await.is_err());
}
