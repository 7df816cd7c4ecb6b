//! Routes. Every JSON body that describes a plan carries the `version` it
//! reflects, and the same number is sent as the `ETag`.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/plans` | latest version of every plan |
//! | POST | `/plans` | store a plan as version 1 |
//! | GET | `/plans/{id}` | a plan (`?version=n` for an older one) |
//! | GET | `/plans/{id}/versions` | committed version numbers |
//! | POST | `/plans/{id}/ops` | apply edits on top of `version` and commit |
//! | POST | `/plans/{id}/auto-schedule` | lay out everything and commit |
//! | GET | `/plans/{id}/{view}` | `validate`, `dates`, `matrix`, `document`, `canvas` |
//! | POST | `/plans/{id}/sessions` | open a what-if session |
//! | GET | `/sessions/{sid}` | the session's working copy |
//! | POST | `/sessions/{sid}/ops` | edit the working copy |
//! | GET | `/sessions/{sid}/{view}` | as for plans |
//! | POST | `/sessions/{sid}/commit` | commit onto the base version |
//! | DELETE | `/sessions/{sid}` | discard |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use milestone_core::schedule::{derive_due_dates, render_canvas_svg, CancelToken, CanvasOptions};
use milestone_core::{MilestonePlanDocument, Plan, RenderFormat};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::ops::{self, Op, OpError};
use crate::store::{PlanStore, StoreError, Version};

/// A what-if working copy. Edits stay here until committed.
#[derive(Debug, Clone)]
pub struct Session {
    pub plan_id: String,
    pub base_version: Version,
    pub plan: Plan,
}

#[derive(Clone)]
pub struct AppState {
    pub store: PlanStore,
    sessions: Arc<Mutex<HashMap<String, Session>>>,
    /// Automatic layouts running longer than this are cancelled.
    pub schedule_timeout: Duration,
}

impl AppState {
    pub fn new(store: PlanStore) -> Self {
        AppState { store, sessions: Arc::default(), schedule_timeout: Duration::from_secs(30) }
    }

    fn session(&self, sid: &str) -> Result<Session, ApiError> {
        self.sessions.lock().expect("session table poisoned").get(sid).cloned().ok_or_else(|| ApiError::no_session(sid))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/plans", get(list_plans).post(create_plan))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/versions", get(plan_versions))
        .route("/plans/{id}/ops", post(plan_ops))
        .route("/plans/{id}/auto-schedule", post(plan_auto_schedule))
        .route("/plans/{id}/sessions", post(open_session))
        .route("/plans/{id}/{view}", get(plan_view))
        .route("/sessions/{sid}", get(get_session).delete(discard_session))
        .route("/sessions/{sid}/ops", post(session_ops))
        .route("/sessions/{sid}/commit", post(commit_session))
        .route("/sessions/{sid}/{view}", get(session_view))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, body: Value) -> Self {
        ApiError { status, body }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": message.into()}))
    }

    fn no_session(sid: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, json!({"error": "unknown_session", "message": format!("unknown session {sid}")}))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownPlan(_) | StoreError::UnknownVersion { .. } | StoreError::BadId(_) => {
                Self::new(StatusCode::NOT_FOUND, json!({"error": "not_found", "message": message}))
            }
            StoreError::Conflict { expected, current, .. } => Self::new(
                StatusCode::CONFLICT,
                json!({"error": "version_conflict", "message": message, "expected": expected, "current": current}),
            ),
            StoreError::ValidationRejected(report) => Self::new(
                StatusCode::BAD_REQUEST,
                json!({"error": "validation_failed", "message": message, "violations": report}),
            ),
            StoreError::Storage(_) | StoreError::Corrupt { .. } => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "storage_failure", "message": message}))
            }
        }
    }
}

impl From<OpError> for ApiError {
    fn from(e: OpError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, json!({"error": "rejected", "message": e.to_string(), "detail": e}))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

fn with_version(version: Version, status: StatusCode, body: Value) -> Response {
    let mut res = (status, Json(body)).into_response();
    res.headers_mut().insert(header::ETAG, HeaderValue::from_str(&format!("\"{version}\"")).expect("digits"));
    res
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("worker panicked")
}

/// Runs edits on a copy of `plan`, cancelling an automatic layout that
/// outlives the timeout. Nothing is applied unless every edit succeeds.
async fn run_ops(state: &AppState, mut plan: Plan, ops: Vec<Op>) -> Result<(Plan, Vec<Value>), ApiError> {
    let token = CancelToken::new();
    let timer = {
        let token = token.clone();
        let timeout = state.schedule_timeout;
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            token.cancel();
        })
    };
    let result = blocking(move || {
        let mut results = Vec::with_capacity(ops.len());
        for op in &ops {
            results.push(ops::apply(&mut plan, op, Some(&token))?);
        }
        Ok::<_, OpError>((plan, results))
    })
    .await;
    timer.abort();
    Ok(result?)
}

#[derive(Debug, Deserialize)]
struct VersionQuery {
    version: Option<Version>,
}

async fn list_plans(State(state): State<AppState>) -> Result<Response, ApiError> {
    let store = state.store.clone();
    let plans = blocking(move || store.list()).await?;
    Ok(Json(json!({ "plans": plans })).into_response())
}

async fn create_plan(State(state): State<AppState>, body: Result<Json<Plan>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(plan) = body?;
    let store = state.store.clone();
    let (id, version) = blocking(move || store.create(&plan)).await?;
    Ok(with_version(version, StatusCode::CREATED, json!({"id": id, "version": version})))
}

async fn load(state: &AppState, id: String, version: Option<Version>) -> Result<(Plan, Version), ApiError> {
    let store = state.store.clone();
    Ok(blocking(move || match version {
        Some(v) => store.load(&id, v).map(|p| (p, v)),
        None => store.load_latest(&id),
    })
    .await?)
}

async fn get_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> Result<Response, ApiError> {
    let (plan, version) = load(&state, id.clone(), q.version).await?;
    Ok(with_version(version, StatusCode::OK, json!({"id": id, "version": version, "plan": plan})))
}

async fn plan_versions(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = state.store.clone();
    let key = id.clone();
    let versions = blocking(move || store.versions(&key)).await?;
    let Some(&latest) = versions.last() else {
        return Err(StoreError::UnknownPlan(id).into());
    };
    Ok(with_version(latest, StatusCode::OK, json!({"id": id, "version": latest, "versions": versions})))
}

/// Either one `op` or a list of `ops`, applied on top of `version`.
#[derive(Debug, Deserialize)]
struct OpsRequest {
    #[serde(default)]
    version: Option<Version>,
    #[serde(default)]
    op: Option<Op>,
    #[serde(default)]
    ops: Vec<Op>,
}

impl OpsRequest {
    fn into_ops(self) -> Result<(Option<Version>, Vec<Op>), ApiError> {
        let mut ops = self.ops;
        if let Some(op) = self.op {
            ops.insert(0, op);
        }
        if ops.is_empty() {
            return Err(ApiError::bad_request("no op given"));
        }
        Ok((self.version, ops))
    }
}

async fn commit_ops(state: &AppState, id: String, version: Version, ops: Vec<Op>) -> Result<(Plan, Version, Vec<Value>), ApiError> {
    let (plan, _) = load(state, id.clone(), Some(version)).await?;
    let (plan, results) = run_ops(state, plan, ops).await?;
    let store = state.store.clone();
    let saved = plan.clone();
    let new_version = blocking(move || store.save(&id, version, &saved)).await?;
    Ok((plan, new_version, results))
}

async fn plan_ops(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<OpsRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let (version, ops) = req.into_ops()?;
    let version = version.ok_or_else(|| ApiError::bad_request("edits need the version they apply to"))?;
    let (_, new_version, results) = commit_ops(&state, id.clone(), version, ops).await?;
    Ok(with_version(new_version, StatusCode::OK, json!({"id": id, "version": new_version, "results": results})))
}

#[derive(Debug, Deserialize)]
struct VersionBody {
    version: Version,
}

async fn plan_auto_schedule(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<VersionBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(VersionBody { version }) = body?;
    let (plan, new_version, mut results) = commit_ops(&state, id.clone(), version, vec![Op::AutoSchedule]).await?;
    let diagnostics = results.pop().and_then(|mut r| r.get_mut("diagnostics").map(Value::take)).unwrap_or(Value::Null);
    Ok(with_version(
        new_version,
        StatusCode::OK,
        json!({"id": id, "version": new_version, "diagnostics": diagnostics, "schedule": plan.schedule}),
    ))
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    version: Option<Version>,
    format: Option<String>,
    as_of: Option<NaiveDate>,
}

/// Read-only views of a plan value. Text formats come back as text, the rest
/// as JSON with the version attached.
fn render_view(plan: &Plan, version: Version, view: &str, q: &ViewQuery) -> Result<Response, ApiError> {
    let text = |content_type: &'static str, body: String| {
        let mut res = ([(header::CONTENT_TYPE, content_type)], body).into_response();
        res.headers_mut().insert(header::ETAG, HeaderValue::from_str(&format!("\"{version}\"")).expect("digits"));
        Ok(res)
    };
    match view {
        "validate" => {
            let report = plan.validate();
            let clean = report.is_clean();
            Ok(with_version(version, StatusCode::OK, json!({"version": version, "clean": clean, "report": report})))
        }
        "dates" => {
            let schedule = plan.schedule.clone().unwrap_or_default();
            let dates = derive_due_dates(&plan.view(), &schedule).map_err(OpError::from)?;
            Ok(with_version(version, StatusCode::OK, json!({"version": version, "dates": dates})))
        }
        "matrix" => {
            let table = plan.matrix.table(&plan.backlog, &plan.graph).map_err(OpError::from)?;
            Ok(with_version(version, StatusCode::OK, json!({"version": version, "matrix": table})))
        }
        "canvas" => {
            let schedule = plan.schedule.clone().unwrap_or_default();
            text("image/svg+xml", render_canvas_svg(&plan.view(), &schedule, &CanvasOptions::default()))
        }
        "document" => {
            let format: RenderFormat = match &q.format {
                Some(f) => f.parse().map_err(ApiError::bad_request)?,
                None => RenderFormat::Json,
            };
            let doc = match (q.as_of, &plan.document) {
                (Some(as_of), _) => {
                    let schedule = plan.schedule.clone().unwrap_or_default();
                    MilestonePlanDocument::assemble(&plan.view(), &schedule, as_of).map_err(OpError::from)?
                }
                (None, Some(doc)) => doc.clone(),
                (None, None) => return Err(OpError::NoDocument.into()),
            };
            match format {
                RenderFormat::Json => {
                    Ok(with_version(version, StatusCode::OK, json!({"version": version, "document": doc})))
                }
                RenderFormat::TextTable => text("text/plain; charset=utf-8", doc.render(format)),
                RenderFormat::Svg => text("image/svg+xml", doc.render(format)),
            }
        }
        other => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            json!({"error": "not_found", "message": format!("no view named {other:?}")}),
        )),
    }
}

async fn plan_view(
    State(state): State<AppState>,
    Path((id, view)): Path<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let (plan, version) = load(&state, id, q.version).await?;
    blocking(move || render_view(&plan, version, &view, &q)).await
}

async fn open_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    // the body is optional: `{"version": n}` picks an older base
    let version = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        serde_json::from_slice::<VersionQuery>(&body).map_err(|e| ApiError::bad_request(e.to_string()))?.version
    };
    let (plan, base_version) = load(&state, id.clone(), version).await?;
    let sid = uuid::Uuid::new_v4().simple().to_string();
    state
        .sessions
        .lock()
        .expect("session table poisoned")
        .insert(sid.clone(), Session { plan_id: id.clone(), base_version, plan });
    Ok(with_version(
        base_version,
        StatusCode::CREATED,
        json!({"session": sid, "plan_id": id, "base_version": base_version, "version": base_version}),
    ))
}

fn session_body(sid: &str, s: &Session) -> Value {
    json!({"session": sid, "plan_id": s.plan_id, "base_version": s.base_version, "version": s.base_version, "plan": s.plan})
}

async fn get_session(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Response, ApiError> {
    let s = state.session(&sid)?;
    Ok(with_version(s.base_version, StatusCode::OK, session_body(&sid, &s)))
}

async fn session_ops(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    body: Result<Json<OpsRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let (_, ops) = req.into_ops()?;
    let s = state.session(&sid)?;
    let (plan, results) = run_ops(&state, s.plan.clone(), ops).await?;
    let mut sessions = state.sessions.lock().expect("session table poisoned");
    let Some(entry) = sessions.get_mut(&sid) else {
        return Err(ApiError::no_session(&sid));
    };
    // another request edited the working copy meanwhile; keep theirs
    if entry.plan != s.plan {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            json!({"error": "session_conflict", "message": "the session changed while this edit ran"}),
        ));
    }
    entry.plan = plan;
    let mut body = session_body(&sid, entry);
    body["results"] = Value::from(results);
    Ok(with_version(entry.base_version, StatusCode::OK, body))
}

async fn session_view(
    State(state): State<AppState>,
    Path((sid, view)): Path<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let s = state.session(&sid)?;
    blocking(move || render_view(&s.plan, s.base_version, &view, &q)).await
}

async fn commit_session(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Response, ApiError> {
    let s = state.session(&sid)?;
    let store = state.store.clone();
    let (id, base, plan) = (s.plan_id.clone(), s.base_version, s.plan.clone());
    let version = blocking(move || store.save(&id, base, &plan)).await?;
    state.sessions.lock().expect("session table poisoned").remove(&sid);
    Ok(with_version(version, StatusCode::OK, json!({"id": s.plan_id, "version": version})))
}

async fn discard_session(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Response, ApiError> {
    let removed = state.sessions.lock().expect("session table poisoned").remove(&sid);
    match removed {
        Some(s) => Ok(with_version(s.base_version, StatusCode::OK, json!({"session": sid, "discarded": true, "version": s.base_version}))),
        None => Err(ApiError::no_session(&sid)),
    }
}
