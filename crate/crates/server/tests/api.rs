use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use conceptwalk::graph::ingest_assertions;
use conceptwalk::io::open_text;
use conceptwalk::session::{Decision, SessionConfig, SessionExport};
use conceptwalk::{KnowledgeGraph, RawEdge, Regime, Session};
use conceptwalk_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn mini_graph() -> Arc<KnowledgeGraph> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/mini_assertions.csv");
    Arc::new(ingest_assertions(open_text(path).unwrap()).unwrap().0)
}

fn fixed_now() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 2, 14, 30, 0).unwrap()
}

fn app_with(graph: Arc<KnowledgeGraph>) -> (AppState, Router) {
    let state = AppState::with_clock(graph, SessionConfig::default(), Arc::new(fixed_now));
    (state.clone(), router(state))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn error_code(v: &Value) -> &str {
    v["error_code"].as_str().unwrap_or_default()
}

#[tokio::test]
async fn create_and_fetch_session() {
    let (state, app) = app_with(mini_graph());
    let (status, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "Hawaii", "seed": 7}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["seed"], 7);
    let nodes = created["map"]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 6);
    assert_eq!(nodes[0]["concept"], "hawaii");
    assert_eq!(nodes[0]["provenance"], "root");
    assert!(created["pending"].is_null());

    let id = created["session_id"].as_str().unwrap();
    let (status, fetched) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, created);

    let (status, err) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "qwertyuiop"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "invalid_concept");
    assert_eq!(state.session_count(), 1);
}

#[tokio::test]
async fn suggestion_protocol() {
    let (_, app) = app_with(mini_graph());
    let (_, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "hawaii", "seed": 11}))).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{id}");
    let on_map: Vec<String> = created["map"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["concept"].as_str().unwrap().to_string())
        .collect();

    let (status, offer) = call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": 0}))).await;
    assert_eq!(status, StatusCode::OK, "{offer}");
    let suggestions: Vec<String> = serde_json::from_value(offer["suggestions"].clone()).unwrap();
    assert!(!suggestions.is_empty() && suggestions.len() <= 5);
    assert!(suggestions.iter().all(|s| !on_map.contains(s)));
    let first_regime = offer["regime"].as_str().unwrap().to_string();

    // A second request while one is pending changes nothing.
    let (_, before) = call(&app, Method::GET, &format!("{base}/export"), None).await;
    let (status, err) = call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": 0}))).await;
    assert_eq!((status, error_code(&err)), (StatusCode::CONFLICT, "pending_batch"));
    let (_, after) = call(&app, Method::GET, &format!("{base}/export"), None).await;
    assert_eq!(before, after);

    let (status, err) = call_json(&app, Method::POST, &format!("{base}/resolve"), Some(json!({"accept": "qqq"}))).await;
    assert_eq!((status, error_code(&err)), (StatusCode::BAD_REQUEST, "not_offered"));

    let (status, resolved) =
        call_json(&app, Method::POST, &format!("{base}/resolve"), Some(json!({"accept": suggestions[0]}))).await;
    assert_eq!(status, StatusCode::OK);
    let new_node = resolved["accepted_node"].as_u64().unwrap();
    let links = resolved["map"]["links"].as_array().unwrap();
    assert!(links.contains(&json!([0, new_node])));

    let (status, err) = call_json(&app, Method::POST, &format!("{base}/resolve"), Some(json!({"dismiss": true}))).await;
    assert_eq!((status, error_code(&err)), (StatusCode::CONFLICT, "stale_batch"));

    let (status, offer) =
        call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": new_node}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_ne!(offer["regime"].as_str().unwrap(), first_regime);
    let (status, resolved) = call_json(&app, Method::POST, &format!("{base}/resolve"), Some(json!({"dismiss": true}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(resolved["accepted_node"].is_null());

    let (status, text) = call(&app, Method::GET, &format!("{base}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    let export: SessionExport = serde_json::from_str(&text).unwrap();
    assert_eq!(export.log.entries.len(), 2);
    assert_eq!(export.log.entries[0].accepted.as_deref(), Some(suggestions[0].as_str()));
    assert_eq!(export.log.entries[1].accepted, None);
    assert_ne!(export.log.entries[0].regime, export.log.entries[1].regime);
    assert_eq!(export.log.entries[0].timestamp, fixed_now());
}

#[tokio::test]
async fn edits() {
    let (_, app) = app_with(mini_graph());
    let (_, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "pizza", "seed": 3}))).await;
    let base = format!("/sessions/{}", created["session_id"].as_str().unwrap());
    let edits = format!("{base}/edits");

    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "manual_add", "text": "Rock", "attach_to": 0}))).await;
    assert_eq!(status, StatusCode::OK, "{r}");
    let rock = r["outcome"]["added"].as_u64().unwrap();
    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "manual_add", "text": "zzyzx", "attach_to": 0}))).await;
    assert_eq!((status, error_code(&r)), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_concept"));
    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "manual_add", "text": "rock", "attach_to": 99}))).await;
    assert_eq!((status, error_code(&r)), (StatusCode::NOT_FOUND, "not_found"));

    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "move", "node": rock, "x": 12.5, "y": -3.0}))).await;
    assert_eq!(status, StatusCode::OK);
    let moved = r["map"]["nodes"].as_array().unwrap().iter().find(|n| n["id"] == rock).unwrap().clone();
    assert_eq!((moved["x"].as_f64(), moved["y"].as_f64()), (Some(12.5), Some(-3.0)));

    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "remove", "node": 0}))).await;
    assert_eq!((status, error_code(&r)), (StatusCode::BAD_REQUEST, "invalid_edit"));
    let (status, r) = call_json(&app, Method::POST, &edits, Some(json!({"action": "remove", "node": rock}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["outcome"]["removed"], json!([rock]));
}

#[tokio::test]
async fn exports_replay_in_process() {
    let graph = mini_graph();
    let (_, app) = app_with(graph.clone());
    let (_, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "ocean", "seed": 99}))).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{id}");
    let (_, offer) = call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": 0}))).await;
    let pick = offer["suggestions"][0].as_str().unwrap().to_string();
    call_json(&app, Method::POST, &format!("{base}/resolve"), Some(json!({"accept": pick}))).await;
    let (_, http_export) = call(&app, Method::GET, &format!("{base}/export"), None).await;

    let mut s = Session::create(&graph, id, "ocean", Some(99), fixed_now(), SessionConfig::default()).unwrap();
    let root = s.map().root();
    let local = s.request_suggestions(&graph, root, fixed_now()).unwrap();
    assert_eq!(local.suggestions[0], pick);
    s.resolve_batch(&Decision::accept(pick)).unwrap();
    assert_eq!(s.export().to_json(), http_export);
}

#[tokio::test]
async fn exhausted_is_reported_and_logged() {
    let g = KnowledgeGraph::build([
        RawEdge::new("a", "b", 1.0),
        RawEdge::new("b", "c", 1.0),
        RawEdge::new("a", "c", 1.0),
        RawEdge::new("c", "d", 1.0),
    ])
    .unwrap();
    let (_, app) = app_with(Arc::new(g));
    let (_, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "c", "seed": 1}))).await;
    let base = format!("/sessions/{}", created["session_id"].as_str().unwrap());
    let (status, err) = call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": 0}))).await;
    assert_eq!((status, error_code(&err)), (StatusCode::UNPROCESSABLE_ENTITY, "exhausted"));
    let (_, export) = call_json(&app, Method::GET, &format!("{base}/export"), None).await;
    let entries = export["log"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["offered"], json!([]));
    let (_, view) = call_json(&app, Method::GET, &base, None).await;
    let expected = match entries[0]["regime"].as_str().unwrap() {
        "BFS" => Regime::Dfs,
        _ => Regime::Bfs,
    };
    assert_eq!(view["next_regime"], json!(expected));
}

#[tokio::test]
async fn autocomplete_and_request_errors() {
    let (_, app) = app_with(mini_graph());
    let (status, r) = call_json(&app, Method::GET, "/autocomplete?q=s&limit=3", None).await;
    assert_eq!(status, StatusCode::OK);
    let labels: Vec<String> = serde_json::from_value(r["labels"].clone()).unwrap();
    assert_eq!(labels, ["salt_water", "sand", "surf"]);
    let (_, r) = call_json(&app, Method::GET, "/autocomplete?q=Salt%20W", None).await;
    assert_eq!(r["labels"], json!(["salt_water"]));
    let (_, r) = call_json(&app, Method::GET, "/autocomplete?q=salt%20", None).await;
    assert_eq!(r["labels"], json!(["salt_water"]));
    let (status, r) = call_json(&app, Method::GET, "/autocomplete?limit=many", None).await;
    assert_eq!((status, error_code(&r)), (StatusCode::BAD_REQUEST, "invalid_request"));

    let (status, r) = call_json(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!((status, error_code(&r)), (StatusCode::NOT_FOUND, "not_found"));
    let (status, r) = call_json(&app, Method::POST, "/sessions", Some(json!({"seed": 1}))).await;
    assert_eq!((status, error_code(&r)), (StatusCode::BAD_REQUEST, "invalid_request"));
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let graph = mini_graph();
    let (state, app) = app_with(graph.clone());
    let mut handles = Vec::new();
    for seed in 0..16u64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let (_, created) = call_json(&app, Method::POST, "/sessions", Some(json!({"root": "beach", "seed": seed}))).await;
            let id = created["session_id"].as_str().unwrap().to_string();
            let base = format!("/sessions/{id}");
            let (status, r) = call_json(&app, Method::POST, &format!("{base}/suggestions"), Some(json!({"node_id": 0}))).await;
            // Every neighbor of "beach" is bootstrapped, so exhaustion is a legitimate outcome.
            assert!(status == StatusCode::OK || error_code(&r) == "exhausted", "{r}");
            (id, seed, call(&app, Method::GET, &format!("{base}/export"), None).await.1)
        }));
    }
    for h in handles {
        let (id, seed, export) = h.await.unwrap();
        let mut local = Session::create(&graph, id, "beach", Some(seed), fixed_now(), SessionConfig::default()).unwrap();
        let root = local.map().root();
        let _ = local.request_suggestions(&graph, root, fixed_now());
        assert_eq!(local.export().to_json(), export);
    }
    assert_eq!(state.session_count(), 16);
}
