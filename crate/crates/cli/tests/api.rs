use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use decomp_cli::server::{router, AppState, ServerConfig};
use decomp_cli::session::ModelTransport;
use decomp_core::corpus::default_dir;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::time::{Duration, Instant};
use tower::ServiceExt;

const FENCHEL_YOUNG: &str = r"x y \ll x \log x + e^y, x \geq 1, y \geq 0";

fn app() -> Router {
    router(AppState::new(ServerConfig {
        corpus_dir: default_dir(),
        store_dir: None,
        transport: ModelTransport::None,
        replay: false,
    }))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["schema_version"], json!(1), "missing schema_version: {v}");
    (status, v)
}

async fn wait_finished(app: &Router, run_id: &str) -> Value {
    let start = Instant::now();
    let mut seen = Vec::new();
    loop {
        let (s, v) = call(app, "GET", &format!("/runs/{run_id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        let status = v["status"].as_str().unwrap().to_owned();
        if seen.last() != Some(&status) {
            seen.push(status.clone());
        }
        if status == "finished" {
            // Never goes back to an earlier state.
            let order = ["pending", "running", "finished"];
            let idx: Vec<usize> = seen.iter().map(|s| order.iter().position(|o| o == s).unwrap()).collect();
            assert!(idx.windows(2).all(|w| w[0] < w[1]), "{seen:?}");
            return v;
        }
        assert!(start.elapsed() < Duration::from_secs(120), "run did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn problem_submission_returns_canonical_form() {
    let app = app();
    let (s, v) = call(&app, "POST", "/problems", Some(json!({ "statement": FENCHEL_YOUNG }))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["id"].as_str().unwrap().starts_with("p_"));
    assert_eq!(v["assumptions"], json!([r"x \geq 1", r"y \geq 0"]));
    let canonical = v["canonical"].as_str().unwrap();
    assert!(canonical.contains(r"\ll"));

    // The same statement maps to the same id and can be fetched back.
    let (_, again) = call(&app, "POST", "/problems", Some(json!({ "statement": canonical }))).await;
    assert_eq!(again["id"], v["id"]);
    let (s, got) = call(&app, "GET", &format!("/problems/{}", v["id"].as_str().unwrap()), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(got["canonical"], v["canonical"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn parse_failure_is_400_with_diagnostics() {
    let app = app();
    let (s, v) = call(&app, "POST", "/problems", Some(json!({ "statement": r"x \ll" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "parse_error");
    let d = v["diagnostics"].as_array().unwrap();
    assert!(!d.is_empty());
    assert!(d[0]["position"].is_u64());

    let (s, v) = call(&app, "POST", "/problems", Some(json!({ "text": FENCHEL_YOUNG }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_ids_are_404() {
    let app = app();
    let (s, _) = call(&app, "GET", "/runs/run_999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/runs", Some(json!({ "problem_id": "no_such_problem" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "PUT", "/runs/run_999/decomposition", Some(json!({ "pieces": [""] }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/problems/p_000000000000", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn corpus_listing() {
    let app = app();
    let (s, v) = call(&app, "GET", "/corpus", None).await;
    assert_eq!(s, StatusCode::OK);
    let list = v["problems"].as_array().unwrap();
    assert!(list.len() >= 25);
    assert!(list.iter().any(|e| e["id"] == "question_fenchel_young"));
}

#[tokio::test(flavor = "multi_thread")]
async fn run_lifecycle_and_decomposition_fork() {
    let app = app();
    let (_, p) = call(&app, "POST", "/problems", Some(json!({ "statement": FENCHEL_YOUNG }))).await;
    let pid = p["id"].as_str().unwrap();
    let (s, v) = call(&app, "POST", "/runs", Some(json!({ "problem_id": pid, "config": { "strategy": "heuristic_only" } }))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let run_id = v["run_id"].as_str().unwrap().to_owned();

    let done = wait_finished(&app, &run_id).await;
    assert_eq!(done["verdict"], "proved");
    assert_eq!(done["banner"], "Proof verified");
    let rec = &done["record"];
    assert_eq!(rec["verdict"]["c"], "2");
    let chosen = &rec["attempts"][rec["chosen"].as_u64().unwrap() as usize];
    assert_eq!(chosen["pieces"].as_array().unwrap().len(), 2);
    assert!(chosen["description"][0].as_str().unwrap().contains(r"2 \log"));

    // A gapped edit forks a new run whose cover check fails with a witness.
    let edit = json!({ "pieces": [r"y \leq \log x", r"y > 2 \log x"] });
    let (s, v) = call(&app, "PUT", &format!("/runs/{run_id}/decomposition"), Some(edit)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let fork = v["run_id"].as_str().unwrap().to_owned();
    assert_ne!(fork, run_id);
    let done = wait_finished(&app, &fork).await;
    assert_eq!(done["forked_from"], json!(run_id));
    let rec = &done["record"];
    assert_eq!(rec["attempts"][0]["source"], "user");
    assert_eq!(rec["attempts"][0]["coverage"]["status"], "not_cover");
    let w = rec["attempts"][0]["coverage"]["witness"].as_object().unwrap();
    let (x, y) = (w["x"].as_f64().unwrap(), w["y"].as_f64().unwrap());
    assert!(x.ln() < y && y <= 2.0 * x.ln(), "witness ({x}, {y}) is not in the gap");
    assert!(rec["warnings"].as_array().unwrap().iter().any(|m| m.as_str().unwrap().contains("does not cover")));
    assert_ne!(done["verdict"], "proved");

    // The parent run is unchanged.
    let (_, parent) = call(&app, "GET", &format!("/runs/{run_id}"), None).await;
    assert_eq!(parent["verdict"], "proved");
}

#[tokio::test(flavor = "multi_thread")]
async fn editing_a_live_run_conflicts() {
    let app = app();
    let (_, v) = call(&app, "POST", "/runs", Some(json!({ "problem_id": "series_double_ladder" }))).await;
    let run_id = v["run_id"].as_str().unwrap().to_owned();
    let edit = json!({ "breakpoints": ["h"] });
    let (s, v) = call(&app, "PUT", &format!("/runs/{run_id}/decomposition"), Some(edit.clone())).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let done = wait_finished(&app, &run_id).await;
    assert_eq!(done["verdict"], "proved");
    let (s, _) = call(&app, "PUT", &format!("/runs/{run_id}/decomposition"), Some(edit)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_edits_are_rejected() {
    let app = app();
    let (_, v) = call(&app, "POST", "/runs", Some(json!({ "problem_id": "question_x_squared" }))).await;
    let run_id = v["run_id"].as_str().unwrap().to_owned();
    wait_finished(&app, &run_id).await;
    let uri = format!("/runs/{run_id}/decomposition");
    let (s, _) = call(&app, "PUT", &uri, Some(json!({ "pieces": [] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "PUT", &uri, Some(json!({ "breakpoints": ["x"] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&app, "PUT", &uri, Some(json!({ "pieces": [r"x \leq"] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "parse_error");
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_config_is_rejected() {
    let app = app();
    let body = json!({ "problem_id": "question_x_squared", "config": { "box_budget": 0 } });
    let (s, _) = call(&app, "POST", "/runs", Some(body)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}
