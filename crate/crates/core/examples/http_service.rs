//! Drives the HTTP API in process: create a session, answer until done.
//! Run with `--listen` to serve on 127.0.0.1:8080 instead.
//!
//! cargo run --example http_service [-- --listen]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;
use elicit::service::{router, serve, ServeOptions};
use elicit::session::{Artifacts, SessionManager};
use elicit::tree::DEFAULT_GAP;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::main]
async fn main() {
    let (db, _) = GeneratorSpec::bundled().generate().unwrap();
    let artifacts = Artifacts::new(DecisionModel::mini_panda(), db, 4, DEFAULT_GAP).unwrap();
    artifacts.warm_up().unwrap();
    let manager = Arc::new(SessionManager::new(Arc::new(artifacts)));

    if std::env::args().any(|a| a == "--listen") {
        let addr = "127.0.0.1:8080".parse().unwrap();
        serve(
            manager,
            addr,
            ServeOptions {
                cors: true,
                ..Default::default()
            },
        )
        .await
        .unwrap();
        return;
    }

    let app = router(manager, &ServeOptions::default());
    let (_, model) = call(&app, Method::GET, "/model", None).await;
    println!(
        "model has {} outcomes",
        model["outcomes"].as_array().unwrap().len()
    );

    let (status, mut s) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"history_id": "1"})),
    )
    .await;
    println!("POST /sessions -> {status}");
    let id = s["id"].as_str().unwrap().to_string();
    let mut answer = true;
    while s["status"] == "IN_PROGRESS" {
        let (_, q) = call(&app, Method::GET, &format!("/sessions/{id}/question"), None).await;
        println!("Q ({}): {}", q["kind"], q["text"]);
        println!("A: {answer}");
        s = call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/answer"),
            Some(json!({"answer": answer})),
        )
        .await
        .1;
        answer = !answer;
    }
    println!(
        "result: {}",
        serde_json::to_string_pretty(&s["result"]).unwrap()
    );

    let (status, err) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/answer"),
        Some(json!({"answer": true})),
    )
    .await;
    println!("answering a finished session -> {status} {err}");
}
