//! Starts the service on a free local port, creates a session for the
//! worked example, advances the clock, posts the material-delay narrative
//! and reads back both plans over HTTP.

use std::thread;

use forecrew::case_study;
use forecrew::model::save_instance;
use forecrew_service::{serve_on, AppState, ServiceConfig};
use serde_json::{json, Value};

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).expect("free port");
    let base = format!("http://{}", listener.local_addr().expect("bound"));
    let state = AppState::new(ServiceConfig::default()).expect("in-memory store");
    thread::spawn(move || runtime.block_on(serve_on(state, listener)));

    let http = reqwest::blocking::Client::new();
    let post = |path: &str, body: Value| -> (u16, Value) {
        let r = http.post(format!("{base}{path}")).json(&body).send().expect("request");
        (r.status().as_u16(), r.json().expect("JSON reply"))
    };
    let get = |path: &str| -> Value { http.get(format!("{base}{path}")).send().expect("request").json().expect("JSON reply") };

    let instance: Value = serde_json::from_slice(&save_instance(&case_study::example_schedule_instance())).expect("JSON");
    let (status, created) =
        post("/sessions", json!({ "instance": instance, "plan": case_study::reference_schedule().to_document() }));
    let id = created["id"].as_str().expect("session id").to_string();
    println!("POST /sessions -> {status}, session {id}");

    let (status, state) = post(&format!("/sessions/{id}/advance"), json!({ "to": 12 }));
    println!("POST advance -> {status}, clock {}", state["clock"]);

    let narrative = "The duct structural materials are delayed until half past the hour.";
    let (status, result) = post(&format!("/sessions/{id}/interventions"), json!({ "narrative": narrative }));
    println!("POST interventions -> {status}\n{}", serde_json::to_string_pretty(&result).expect("JSON"));

    let (status, err) = post(&format!("/sessions/{id}/interventions"), json!({ "narrative": "" }));
    println!("empty narrative -> {status} {}", err["error"]);

    for n in 0..2 {
        let plan = get(&format!("/sessions/{id}/plans/{n}"));
        println!("plan {n}: T4 {} T5 {}", plan["task_times"]["T4"], plan["task_times"]["T5"]);
    }
    let events = get(&format!("/sessions/{id}/events"));
    let kinds: Vec<&str> = events["events"].as_array().expect("list").iter().filter_map(|e| e["type"].as_str()).collect();
    println!("events: {}", kinds.join(", "));
}
