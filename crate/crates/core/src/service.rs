//! JSON-over-HTTP service around one [`SessionState`].
//!
//! Every route is mounted both at the root and under `/v1`, and every
//! response body carries `"version": "v1"`. Invalid values answer 422 and
//! group conflicts answer 409.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{Value, json};

use crate::distance::triangle_check;
use crate::format::matrix_from_value;
use crate::matrix::PcMatrix;
use crate::session::{IiMode, SessionError, SessionState, report_for_mode};

pub const API_VERSION: &str = "v1";

pub type SharedSession = Arc<Mutex<SessionState>>;

pub fn shared(m: PcMatrix) -> SharedSession {
    Arc::new(Mutex::new(SessionState::new(m)))
}

struct ApiError(StatusCode, String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = if e.is_group_conflict() {
            StatusCode::CONFLICT
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "version": API_VERSION, "error": self.1 }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn reply(mut body: Value) -> ApiResult {
    body["version"] = Value::from(API_VERSION);
    Ok(Json(body))
}

fn lock(s: &SharedSession) -> std::sync::MutexGuard<'_, SessionState> {
    // A panic mid-request cannot leave the state half-edited: edits validate
    // before mutating, so a poisoned lock still holds a coherent session.
    s.lock().unwrap_or_else(|p| p.into_inner())
}

fn state_body(s: &SessionState) -> Value {
    json!({
        "matrix": s.matrix(),
        "report": s.report(),
        "history": s.history(),
    })
}

async fn get_matrix(State(s): State<SharedSession>) -> ApiResult {
    reply(state_body(&lock(&s)))
}

async fn put_matrix(State(s): State<SharedSession>, body: Result<Json<Value>, JsonRejection>) -> ApiResult {
    let Json(doc) = body?;
    let mut session = lock(&s);
    let m = matrix_from_value(&doc, None).map_err(|e| match e {
        crate::format::FormatError::Group(g) => ApiError::from(SessionError::from(g)),
        other => ApiError(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
    })?;
    session.load(m);
    reply(state_body(&session))
}

#[derive(Deserialize)]
struct EntryEdit {
    i: usize,
    j: usize,
    value: Value,
}

async fn put_entry(State(s): State<SharedSession>, body: Result<Json<EntryEdit>, JsonRejection>) -> ApiResult {
    let Json(edit) = body?;
    let mut session = lock(&s);
    session.edit_payload(edit.i, edit.j, &edit.value)?;
    reply(state_body(&session))
}

#[derive(Deserialize)]
struct ModeQuery {
    mode: Option<String>,
}

async fn get_ii(State(s): State<SharedSession>, Query(q): Query<ModeQuery>) -> ApiResult {
    let mode: IiMode = q.mode.as_deref().unwrap_or("local").parse()?;
    let session = lock(&s);
    let (ii, report) = report_for_mode(session.matrix(), mode)?;
    let mut body = json!({ "mode": mode, "ii": ii });
    if let Some(r) = report {
        body["worst"] = json!(r.worst_triad);
        body["triads"] = json!(r.per_triad);
    }
    reply(body)
}

async fn get_worst_triad(State(s): State<SharedSession>) -> ApiResult {
    let session = lock(&s);
    let r = session.report();
    let entries = r.worst_triad.map(|[i, j, k]| {
        let m = session.matrix();
        json!({ "x": m.get(i, j), "y": m.get(i, k), "z": m.get(j, k) })
    });
    reply(json!({ "worst": r.worst_triad, "ii": r.value, "entries": entries }))
}

#[derive(Deserialize)]
struct PairQuery {
    i: usize,
    j: usize,
}

async fn get_suggest(State(s): State<SharedSession>, Query(q): Query<PairQuery>) -> ApiResult {
    let session = lock(&s);
    let value = session.suggest(q.i, q.j)?;
    let current = session.matrix().get(q.i, q.j);
    reply(json!({
        "i": q.i,
        "j": q.j,
        "value": value.to_payload(),
        "current": current.to_payload(),
    }))
}

async fn post_reduce(State(s): State<SharedSession>) -> ApiResult {
    let mut session = lock(&s);
    let step = session.reduce()?;
    reply(json!({
        "kind": step.kind,
        "triad": step.triad,
        "ii_before": step.ii_before,
        "ii_after": step.ii_after,
        "matrix": step.matrix,
    }))
}

async fn get_distmat(State(s): State<SharedSession>) -> ApiResult {
    let k = lock(&s).distance_matrix()?;
    let triangle = triangle_check(&k);
    reply(json!({ "n": k.size(), "k": k.rows(), "triangle": triangle }))
}

async fn post_reset(State(s): State<SharedSession>) -> ApiResult {
    let mut session = lock(&s);
    session.reset();
    reply(state_body(&session))
}

fn routes() -> Router<SharedSession> {
    Router::new()
        .route("/matrix", get(get_matrix).put(put_matrix))
        .route("/matrix/entry", put(put_entry))
        .route("/ii", get(get_ii))
        .route("/worst-triad", get(get_worst_triad))
        .route("/suggest", get(get_suggest))
        .route("/reduce", post(post_reduce))
        .route("/distmat", get(get_distmat))
        .route("/reset", post(post_reset))
}

pub fn router(session: SharedSession) -> Router {
    Router::new()
        .merge(routes())
        .nest("/v1", routes())
        .with_state(session)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, session: SharedSession) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(session)).await
}
