use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use interviewkit::generator::{Decode, GenConfig, GeneratorModel};
use interviewkit::synth::{interview_corpus, InterviewSynth};
use interviewkit::session::{SessionManager, SessionOptions};
use interviewkit::transcript::{read_corpus, FlagToken, Split};
use interviewkit::vocab::Vocab;
use interviewkit_service::{load_manager, router, ServiceConfig};

fn model(forbid_end: bool) -> GeneratorModel {
    let c = interview_corpus(3, &InterviewSynth::default(), 1, Split::Trn).unwrap();
    let mut m = GeneratorModel::new(GenConfig::desk(Vocab::build(&c)), 9).unwrap();
    if forbid_end {
        let id = m.store.id("output.b").unwrap();
        let col = m.config.vocab.flag_id(FlagToken::E);
        m.store.get_mut(id).value.set(0, col, -100.0);
    }
    m
}

fn app(forbid_end: bool) -> Router {
    router(Arc::new(SessionManager::new(Arc::new(model(forbid_end)), SessionOptions::default())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn create_starts_with_b() {
    let app = app(false);
    let (status, body) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["first_turn"]["flag"], "B");
    assert_eq!(body["first_turn"]["turn_index"], 1);
    assert_eq!(body["first_turn"]["session_status"], "active");
    let id = body["id"].as_str().unwrap();

    let (status, t) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t["turns"].as_array().unwrap().len(), 1);
    assert_eq!(t["turns"][0]["flag"], "B");

    let (_, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (_, again) = call(&app, "POST", "/sessions", Some(json!({"decode": {"mode": "sampled", "seed": 4}}))).await;
    assert_ne!(again["id"], body["id"]);
    let (_, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn errors_are_json_with_codes() {
    let app = app(false);
    let (status, body) = call(&app, "POST", "/sessions/missing/utterances", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    assert!(body["message"].as_str().unwrap().contains("missing"));

    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_str().unwrap();
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/utterances"), Some(json!({"text": "  "}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "empty_text");

    let (status, _) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn cap_then_conflict() {
    let app = app(true);
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/utterances");
    let mut last = Value::Null;
    for _ in 0..15 {
        let (status, body) = call(&app, "POST", &uri, Some(json!({"text": "I see."}))).await;
        assert_eq!(status, StatusCode::OK);
        last = body;
    }
    assert_eq!(last["turn_index"], 30);
    assert_eq!(last["session_status"], "ended_by_cap");
    assert!(last["bot_text"].is_null());
    let (status, body) = call(&app, "POST", &uri, Some(json!({"text": "Hello?"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "session_ended");

    let (_, t) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(t["metrics"]["early_ending"], 100.0);
    let corpus = read_corpus(t["export"].as_str().unwrap().as_bytes()).unwrap();
    assert_eq!(corpus.dialogues()[0].len(), 30);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn fifty_interleaved_posts() {
    let app = app(true);
    let mut ids = Vec::new();
    for _ in 0..2 {
        let (_, created) = call(&app, "POST", "/sessions", None).await;
        ids.push(created["id"].as_str().unwrap().to_string());
    }
    let tasks: Vec<_> = (0..50)
        .map(|i| {
            let app = app.clone();
            let uri = format!("/sessions/{}/utterances", ids[i % 2]);
            tokio::spawn(async move { call(&app, "POST", &uri, Some(json!({ "text": format!("reply {i}") }))).await })
        })
        .collect();
    let mut ok = 0;
    let mut conflicts = 0;
    for t in tasks {
        match t.await.unwrap().0 {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => conflicts += 1,
            s => panic!("unexpected status {s}"),
        }
    }
    assert_eq!((ok, conflicts), (30, 20));
    for id in &ids {
        let (_, t) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
        let turns = t["turns"].as_array().unwrap();
        assert_eq!(turns.len(), 30);
        for (i, turn) in turns.iter().enumerate() {
            assert_eq!(turn["index"], i + 1);
            assert_eq!(turn["speaker"], if i % 2 == 0 { "S1" } else { "S2" });
        }
    }
}

#[test]
fn missing_checkpoint_is_reported() {
    let cfg = ServiceConfig { port: 0, checkpoint: "/nonexistent/gen.json".into(), decode: Decode::Greedy, tau: 0.9, log_dir: None };
    let err = load_manager(&cfg).err().unwrap();
    assert_eq!(err.body.code, "checkpoint_missing");
}

#[tokio::test]
async fn serves_from_a_saved_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.json");
    model(false).to_checkpoint().save(&path).unwrap();
    let cfg = ServiceConfig { port: 0, checkpoint: path, decode: Decode::Greedy, tau: 0.9, log_dir: Some(dir.path().join("logs")) };
    let app = router(Arc::new(load_manager(&cfg).unwrap()));
    let (status, created) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap();
    assert!(dir.path().join("logs").join(format!("{id}.jsonl")).exists());
}
