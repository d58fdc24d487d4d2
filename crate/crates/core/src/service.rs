//! JSON-over-HTTP access to elicitation sessions.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{"history_id": "0"}` |
//! | GET | `/sessions/{id}` | |
//! | GET | `/sessions/{id}/question` | |
//! | POST | `/sessions/{id}/answer` | `{"answer": true}` |
//! | GET | `/model` | |
//! | GET | `/trees/{history_id}` | |
//!
//! Every id is a string on the wire. Errors come back as
//! `{"code": ..., "message": ...}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::error::Error;
use crate::model::DecisionModel;
use crate::session::{QuestionView, Session, SessionManager, SessionStatus};
use crate::tree::{ElicitationTree, TreeNode};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            Error::UnknownHistory(_) => (StatusCode::NOT_FOUND, "unknown_history"),
            Error::InvalidId {
                kind: "history", ..
            } => (StatusCode::NOT_FOUND, "unknown_history"),
            Error::SessionComplete(_) => (StatusCode::CONFLICT, "session_complete"),
            Error::SessionBusy(_) => (StatusCode::CONFLICT, "conflict"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"code": self.code, "message": self.message})),
        )
            .into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptView {
    pub question: QuestionView,
    pub answer: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultView {
    pub cluster_label: String,
    pub prototype_id: String,
    pub prototype_values: Vec<f64>,
    pub strategy_id: String,
    pub strategy_label: String,
    pub strategy_description: String,
    pub expected_utility: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub history_id: String,
    pub history_label: String,
    pub status: SessionStatus,
    pub questions_answered: usize,
    /// Depth of the tree, an upper bound on the questions asked.
    pub max_questions: usize,
    pub question: Option<QuestionView>,
    pub transcript: Vec<TranscriptView>,
    pub result: Option<ResultView>,
}

fn session_view(manager: &SessionManager, s: &Session) -> ApiResult<SessionView> {
    let artifacts = manager.artifacts();
    let model = artifacts.model();
    let tree = artifacts.tree(s.history)?;
    let question = if s.is_complete() {
        None
    } else {
        Some(manager.get_question(&s.id)?)
    };
    let result = s.result.as_ref().map(|r| {
        let strategy = &model.strategies()[r.strategy];
        ResultView {
            cluster_label: r.label.to_string(),
            prototype_id: r.prototype.clone(),
            prototype_values: r.prototype_values.clone(),
            strategy_id: r.strategy.to_string(),
            strategy_label: strategy.label.clone(),
            strategy_description: strategy.description.clone(),
            expected_utility: r.expected_utility,
        }
    });
    Ok(SessionView {
        id: s.id.clone(),
        history_id: s.history.to_string(),
        history_label: model.histories()[s.history].label.clone(),
        status: s.status,
        questions_answered: s.transcript.len(),
        max_questions: tree.depth(),
        question,
        transcript: s
            .transcript
            .iter()
            .map(|t| TranscriptView {
                question: QuestionView::new(&t.question, model),
                answer: t.answer,
            })
            .collect(),
        result,
    })
}

/// Model metadata with string ids.
pub fn model_view(model: &DecisionModel) -> Value {
    json!({
        "name": model.name(),
        "best_anchor": model.best_anchor().to_string(),
        "worst_anchor": model.worst_anchor().to_string(),
        "outcomes": model.outcomes().iter().map(|o| json!({
            "id": o.id.to_string(),
            "label": o.label,
            "question_text": o.question_text,
        })).collect::<Vec<_>>(),
        "histories": model.histories().iter().map(|h| json!({
            "id": h.id.to_string(),
            "label": h.label,
            "prior": h.prior,
        })).collect::<Vec<_>>(),
        "strategies": model.strategies().iter().map(|s| json!({
            "id": s.id.to_string(),
            "label": s.label,
            "description": s.description,
        })).collect::<Vec<_>>(),
    })
}

fn node_view(node: &TreeNode, model: &DecisionModel) -> Value {
    match node {
        TreeNode::Split { question, yes, no } => json!({
            "question": QuestionView::new(question, model),
            "yes": node_view(yes, model),
            "no": node_view(no, model),
        }),
        TreeNode::Leaf(leaf) => json!({
            "cluster_label": leaf.label.to_string(),
            "prototype_id": leaf.prototype,
            "counts": leaf.counts.iter().map(|(l, n)| (l.to_string(), *n)).collect::<std::collections::BTreeMap<_, _>>(),
        }),
    }
}

/// Tree export with string ids.
pub fn tree_view(tree: &ElicitationTree, model: &DecisionModel) -> Value {
    json!({
        "history_id": tree.history.to_string(),
        "history_label": model.histories()[tree.history].label,
        "depth": tree.depth(),
        "k": tree.meta.k,
        "gap": tree.meta.gap,
        "db_fingerprint": tree.meta.db_fingerprint,
        "root": node_view(&tree.root, model),
    })
}

#[derive(Deserialize)]
struct CreateBody {
    history_id: String,
}

#[derive(Deserialize)]
struct AnswerBody {
    answer: bool,
}

type Shared = Arc<SessionManager>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })?
}

async fn create_session(
    State(m): State<Shared>,
    body: std::result::Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(body) = body?;
    let view = blocking(move || {
        let s = m.create_session(&body.history_id)?;
        session_view(&m, &s)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(m): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let s = m.get(&id)?;
    Ok(Json(session_view(&m, &s)?))
}

async fn get_question(
    State(m): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<QuestionView>> {
    Ok(Json(m.get_question(&id)?))
}

async fn submit_answer(
    State(m): State<Shared>,
    Path(id): Path<String>,
    body: std::result::Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(body) = body?;
    let s = m.submit_answer(&id, body.answer)?;
    Ok(Json(session_view(&m, &s)?))
}

async fn get_model(State(m): State<Shared>) -> Json<Value> {
    Json(model_view(m.artifacts().model()))
}

async fn get_tree(State(m): State<Shared>, Path(history): Path<String>) -> ApiResult<Json<Value>> {
    let view = blocking(move || {
        let model = m.artifacts().model();
        let h = model
            .find_history(&history)
            .ok_or_else(|| Error::UnknownHistory(history.clone()))?;
        let tree = m.artifacts().tree(h)?;
        Ok(tree_view(&tree, model))
    })
    .await?;
    Ok(Json(view))
}

#[derive(Clone, Debug, Default)]
pub struct ServeOptions {
    /// Directory of static files served under `/`.
    pub static_dir: Option<PathBuf>,
    pub cors: bool,
}

pub fn router(manager: Arc<SessionManager>, options: &ServeOptions) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/question", get(get_question))
        .route("/sessions/:id/answer", post(submit_answer))
        .route("/model", get(get_model))
        .route("/trees/:history_id", get(get_tree))
        .with_state(manager);
    if let Some(dir) = &options.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if options.cors {
        app = app.layer(CorsLayer::permissive());
    }
    app
}

/// Serves until Ctrl-C.
pub async fn serve(
    manager: Arc<SessionManager>,
    addr: SocketAddr,
    options: ServeOptions,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(manager, &options))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
