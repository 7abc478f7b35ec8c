use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use forecrew::case_study;
use forecrew::model::save_instance;
use forecrew::narrative::{worked_examples, ScriptedClient};
use forecrew_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const DELAY: &str = "The duct structural materials are delayed until half past the hour.";

fn app(config: ServiceConfig) -> (Arc<AppState>, Router) {
    let state = AppState::new(config).unwrap();
    (state.clone(), router(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn create_body() -> Value {
    let instance: Value = serde_json::from_slice(&save_instance(&case_study::example_schedule_instance())).unwrap();
    json!({ "instance": instance, "plan": case_study::reference_schedule().to_document() })
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(create_body())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn r1_order(plan: &Value) -> Vec<String> {
    let mut tasks: Vec<(i64, String)> = plan["assignments"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(_, units)| units.as_array().unwrap().iter().any(|u| u == "R1#0"))
        .map(|(t, _)| (plan["task_times"][t][0].as_i64().unwrap(), t.clone()))
        .collect();
    tasks.sort();
    tasks.into_iter().map(|(_, t)| t).collect()
}

#[tokio::test]
async fn delay_narrative_round_trip() {
    let (_, app) = app(ServiceConfig::default());
    let id = new_session(&app).await;

    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["clock"], 0);
    assert_eq!(state["tasks"]["T1"], "ongoing");
    assert_eq!(state["tasks"]["T3"], "uninitiated");

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 12 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, result) =
        call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": DELAY }))).await;
    assert_eq!(status, StatusCode::OK, "{result}");
    assert_eq!(result["plan_id"], 1);
    assert_eq!(result["deltas"], json!([{ "kind": "start_time", "task": "T4", "shift": 30 }]));
    assert!(result["retiming"].as_i64().unwrap() > 0);
    assert_eq!(result["makespan_change"], 0);

    let (_, original) = call(&app, "GET", &format!("/sessions/{id}/plans/0"), None).await;
    assert_eq!(original, json!(case_study::reference_schedule().to_document()));
    let (_, revised) = call(&app, "GET", &format!("/sessions/{id}/plans/1"), None).await;
    assert_eq!(r1_order(&original)[1..3], ["T4", "T5"]);
    assert_eq!(r1_order(&revised)[1..3], ["T5", "T4"]);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/plans/2"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 315 }))).await;
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert!(state["tasks"].as_object().unwrap().values().all(|s| s == "completed"));
}

#[tokio::test]
async fn error_statuses() {
    let (_, app) = app(ServiceConfig::default());
    let (status, _) = call(&app, "POST", "/sessions/nope/interventions", Some(json!({ "narrative": DELAY }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = new_session(&app).await;
    let url = format!("/sessions/{id}/interventions");
    let (status, body) = call(&app, "POST", &url, Some(json!({ "narrative": "  " }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");


    let (status, body) =
        call(&app, "POST", &url, Some(json!({ "narrative": "One robot with a sprayer has broken down." }))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["plan_id"], 0);

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 30 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 10 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "instance": { "tasks": 3 } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unusable_model_changes_are_422_with_diagnostics() {
    let reply = r#"{"changes": [{"constraint_type": 2, "parameters": ["T99", 2]}]}"#;
    let model = Arc::new(ScriptedClient::new([reply]));
    let (_, app) = app(ServiceConfig { offline: false, model: Some(model), ..ServiceConfig::default() });
    let id = new_session(&app).await;
    let url = format!("/sessions/{id}/interventions");
    let (status, body) = call(&app, "POST", &url, Some(json!({ "narrative": "The mystery task takes 2 hours." }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["diagnostics"][0].as_str().unwrap().contains("T99"), "{body}");
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["plan_id"], 0);
}

#[tokio::test]
async fn worked_example_two_is_echoed() {
    let (_, app) = app(ServiceConfig::default());
    let id = new_session(&app).await;
    let (narrative, gold) = worked_examples().swap_remove(1);
    let (status, result) =
        call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": narrative }))).await;
    assert_eq!(status, StatusCode::OK, "{result}");
    assert_eq!(result["deltas"], json!(gold));
}

#[tokio::test]
async fn zero_delta_narrative_only_logs() {
    let (_, app) = app(ServiceConfig::default());
    let id = new_session(&app).await;
    let (status, result) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/interventions"),
        Some(json!({ "narrative": "Everything is going to plan today." })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{result}");
    assert_eq!(result["plan_id"], Value::Null);
    assert_eq!(result["deltas"], json!([]));
}

#[tokio::test]
async fn solving_runs_as_a_job() {
    let (_, app) = app(ServiceConfig::default());
    let mut body = create_body();
    body.as_object_mut().unwrap().remove("plan");
    let (status, accepted) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let poll = accepted["poll"].as_str().unwrap().to_string();
    let job = loop {
        let (_, job) = call(&app, "GET", &poll, None).await;
        if job["state"] == "done" {
            break job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(job["status"], 201, "{job}");
    assert_eq!(job["result"]["state"]["makespan"], 315);
    let id = job["result"]["id"].as_str().unwrap();
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn restart_replays_the_persisted_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { data_dir: Some(dir.path().to_path_buf()), ..ServiceConfig::default() };
    let (before, plans) = {
        let (_, app) = app(config.clone());
        let id = new_session(&app).await;
        call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 12 }))).await;
        call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": DELAY }))).await;
        call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "by": 40 }))).await;
        let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
        let (_, plan) = call(&app, "GET", &format!("/sessions/{id}/plans/1"), None).await;
        (state, plan)
    };
    let (state, app) = app(config);
    assert_eq!(state.store.ids(), ["s1"]);
    let (_, after) = call(&app, "GET", "/sessions/s1/state", None).await;
    assert_eq!(before, after);
    let (_, plan) = call(&app, "GET", "/sessions/s1/plans/1", None).await;
    assert_eq!(plans, plan);
    assert_eq!(new_session(&app).await, "s2");
}

/// Drops solver timings, which differ between otherwise equal runs.
fn without_stats(mut state: Value) -> Value {
    state["plan"].as_object_mut().unwrap().remove("stats");
    state
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_interventions_serialize() {
    let first = "The wall painting task takes 90 minutes.";
    let second = DELAY;
    let (_, app) = app(ServiceConfig::default());

    let mut orders = Vec::new();
    for (a, b) in [(first, second), (second, first)] {
        let id = new_session(&app).await;
        call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 12 }))).await;
        call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": a }))).await;
        call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": b }))).await;
        orders.push(without_stats(call(&app, "GET", &format!("/sessions/{id}/state"), None).await.1));
    }

    let id = new_session(&app).await;
    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 12 }))).await;
    let url = format!("/sessions/{id}/interventions");
    let (ra, rb) = tokio::join!(
        call(&app, "POST", &url, Some(json!({ "narrative": first }))),
        call(&app, "POST", &url, Some(json!({ "narrative": second }))),
    );
    assert_eq!((ra.0, rb.0), (StatusCode::OK, StatusCode::OK));
    let mut ids = [ra.1["plan_id"].as_i64().unwrap(), rb.1["plan_id"].as_i64().unwrap()];
    ids.sort();
    assert_eq!(ids, [1, 2]);
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert!(orders.contains(&without_stats(state)), "concurrent result matches no sequential order");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn events_long_poll() {
    let (_, app) = app(ServiceConfig::default());
    let id = new_session(&app).await;
    let (_, first) = call(&app, "GET", &format!("/sessions/{id}/events"), None).await;
    assert_eq!(first["events"][0]["type"], "genesis");
    let next = first["next"].as_u64().unwrap();

    let waiting = {
        let app = app.clone();
        let url = format!("/sessions/{id}/events?since={next}&wait_ms=10000");
        tokio::spawn(async move { call(&app, "GET", &url, None).await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 15 }))).await;
    let (_, tail) = waiting.await.unwrap();
    let kinds: Vec<&str> = tail["events"].as_array().unwrap().iter().map(|e| e["type"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"task_completed"), "{kinds:?}");
    assert_eq!(kinds.last(), Some(&"advanced"));
}

#[tokio::test]
async fn exported_log_imports_to_the_same_state() {
    let (_, app) = app(ServiceConfig::default());
    let id = new_session(&app).await;
    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "to": 12 }))).await;
    call(&app, "POST", &format!("/sessions/{id}/interventions"), Some(json!({ "narrative": DELAY }))).await;
    let (_, log) = call(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    let (status, imported) = call(&app, "POST", "/sessions", Some(json!({ "log": log }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, original) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(imported["state"], original);
}
