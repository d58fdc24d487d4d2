use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;
use elicit::service::{router, ServeOptions};
use elicit::session::{Artifacts, SessionManager};
use elicit::utility::{UtilityDatabase, UtilityFunction};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const THREE_OUTCOME: &str = r#"{
  "outcomes": [
    {"id": 0, "label": "A", "question_text": "outcome A"},
    {"id": 1, "label": "B", "question_text": "outcome B"},
    {"id": 2, "label": "C", "question_text": "outcome C"}
  ],
  "histories": [{"id": 0, "label": "ANY", "prior": 1.0}],
  "strategies": [
    {"id": 0, "label": "s1", "description": "first"},
    {"id": 1, "label": "s2", "description": "second"}
  ],
  "prob": [[[0.5, 0.5, 0.0]], [[0.8, 0.0, 0.2]]],
  "best_anchor": 0,
  "worst_anchor": 2
}"#;

fn panda_manager() -> Arc<SessionManager> {
    let (db, _) = GeneratorSpec::bundled().generate().unwrap();
    let a = Artifacts::new(DecisionModel::mini_panda(), db, 4, 0.05).unwrap();
    Arc::new(SessionManager::new(Arc::new(a)))
}

fn small_manager(k: usize) -> Arc<SessionManager> {
    let m = DecisionModel::from_json(THREE_OUTCOME).unwrap();
    let db = UtilityDatabase::new(
        vec![
            UtilityFunction::new("u1", vec![1.0, 0.9, 0.0], 0, 2).unwrap(),
            UtilityFunction::new("u2", vec![1.0, 0.2, 0.0], 0, 2).unwrap(),
        ],
        3,
    )
    .unwrap();
    Arc::new(SessionManager::new(Arc::new(
        Artifacts::new(m, db, k, 0.05).unwrap(),
    )))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, history: &str) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        "/sessions",
        Some(&json!({ "history_id": history }).to_string()),
    )
    .await
}

async fn answer(app: &Router, id: &str, a: bool) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        &format!("/sessions/{id}/answer"),
        Some(&json!({ "answer": a }).to_string()),
    )
    .await
}

#[tokio::test]
async fn full_session_flow() {
    let m = panda_manager();
    let app = router(Arc::clone(&m), &ServeOptions::default());
    let (status, s) = create(&app, "2").await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(s["status"], "IN_PROGRESS");
    assert_eq!(s["history_id"], "2");
    assert_eq!(s["history_label"], "35YO");
    assert!(s["question"]["text"].is_string());
    let id = s["id"].as_str().unwrap().to_string();

    let (status, q) = call(&app, Method::GET, &format!("/sessions/{id}/question"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(q["kind"], "preference");
    let labels = q["outcome_labels"].as_array().unwrap();
    assert_eq!(labels.len(), 2);
    assert!(q["outcome_ids"][0].is_string());

    let mut s = s;
    let mut asked = 0;
    while s["status"] == "IN_PROGRESS" {
        s = answer(&app, &id, asked % 2 == 0).await.1;
        asked += 1;
    }
    assert!(asked <= s["max_questions"].as_u64().unwrap() as usize);
    assert_eq!(s["questions_answered"], asked);
    assert!(s["question"].is_null());
    let r = &s["result"];
    assert!(r["strategy_id"].is_string());
    assert!(r["cluster_label"].is_string());
    let values: Vec<f64> = serde_json::from_value(r["prototype_values"].clone()).unwrap();
    assert_eq!(values.len(), 22);
    let model = DecisionModel::mini_panda();
    let (best, eu) = model.best_strategy(&values, 2).unwrap();
    assert_eq!(r["strategy_id"], best.to_string());
    assert_eq!(r["expected_utility"].as_f64().unwrap(), eu);

    let (status, fetched) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, s);

    // Replaying the transcript gives the same result.
    let (_, mut again) = create(&app, "35YO").await;
    let id2 = again["id"].as_str().unwrap().to_string();
    for t in s["transcript"].as_array().unwrap() {
        again = answer(&app, &id2, t["answer"].as_bool().unwrap()).await.1;
    }
    assert_eq!(again["result"], s["result"]);
    assert_eq!(again["transcript"], s["transcript"]);

    let (status, err) = answer(&app, &id, true).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session_complete");
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}/question"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(
        call(&app, Method::GET, &format!("/sessions/{id}"), None)
            .await
            .1,
        s
    );
}

#[tokio::test]
async fn error_responses() {
    let app = router(panda_manager(), &ServeOptions::default());
    let (status, err) = create(&app, "17").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_history");
    assert!(err["message"].is_string());

    let (status, err) = call(&app, Method::GET, "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_session");

    let (status, err) = call(&app, Method::POST, "/sessions", Some("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_request");

    let (status, err) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(r#"{"history_id": 0}"#),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_request");

    let (status, _) = call(&app, Method::GET, "/trees/99", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn concurrent_answers_conflict() {
    let m = panda_manager();
    let app = router(Arc::clone(&m), &ServeOptions::default());
    let id = create(&app, "0").await.1["id"]
        .as_str()
        .unwrap()
        .to_string();
    let guard = m.begin_answer(&id).unwrap();
    let (status, err) = answer(&app, &id, true).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "conflict");
    assert_eq!(m.get(&id).unwrap().transcript.len(), 0);
    drop(guard);
    let (status, s) = answer(&app, &id, true).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["questions_answered"], 1);
}

#[tokio::test]
async fn model_and_tree_metadata() {
    let app = router(panda_manager(), &ServeOptions::default());
    let (status, model) = call(&app, Method::GET, "/model", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(model["outcomes"].as_array().unwrap().len(), 22);
    assert_eq!(model["strategies"].as_array().unwrap().len(), 18);
    assert_eq!(model["histories"][3]["id"], "3");
    assert_eq!(model["best_anchor"], "0");

    let (status, by_index) = call(&app, Method::GET, "/trees/1", None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, by_label) = call(&app, Method::GET, "/trees/25YO", None).await;
    assert_eq!(by_index, by_label);
    assert_eq!(by_index["history_id"], "1");
    assert!(by_index["root"]["question"]["text"].is_string());
    assert!(by_index["depth"].as_u64().unwrap() >= 1);
}

#[tokio::test]
async fn feature_question_exposes_lottery() {
    let app = router(small_manager(2), &ServeOptions::default());
    let (_, s) = create(&app, "ANY").await;
    let id = s["id"].as_str().unwrap();
    let (_, q) = call(&app, Method::GET, &format!("/sessions/{id}/question"), None).await;
    assert_eq!(q["kind"], "feature");
    assert_eq!(q["c"], 0.55);
    assert!(q["text"].as_str().unwrap().contains("55%"));
    assert!(q["text"].as_str().unwrap().contains("45%"));
    assert_eq!(q["lottery"]["best_outcome"], "A");
    assert!((q["lottery"]["p_worst"].as_f64().unwrap() - 0.45).abs() < 1e-12);
    let (_, done) = answer(&app, id, true).await;
    assert_eq!(done["status"], "COMPLETE");
    assert_eq!(done["result"]["prototype_id"], "u1");
    assert_eq!(done["result"]["strategy_id"], "0");
}

#[tokio::test]
async fn single_leaf_tree_completes_on_creation() {
    let app = router(small_manager(1), &ServeOptions::default());
    let (status, s) = create(&app, "0").await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(s["status"], "COMPLETE");
    assert_eq!(s["questions_answered"], 0);
    assert!(s["result"]["strategy_id"].is_string());
}

#[tokio::test]
async fn static_files_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>hi</h1>").unwrap();
    let options = ServeOptions {
        static_dir: Some(dir.path().to_path_buf()),
        cors: true,
    };
    let app = router(small_manager(1), &options);
    let req = Request::builder()
        .uri("/index.html")
        .header("origin", "http://example.test")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers().contains_key("access-control-allow-origin"));
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<h1>hi</h1>");
}
