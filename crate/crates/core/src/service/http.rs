//! JSON-over-HTTP API.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | POST | `/applications[?appId=]` | bundle document (raw or multipart) | `{appId}` |
//! | GET | `/applications` | | `[appId]` |
//! | POST | `/sessions` | `{appId, userId?, community?, client, seed?}` | `{sessionId, responses, ended}` |
//! | POST | `/sessions/{id}/turns` | `{utterance}` | `{responses, ended}` |
//! | GET | `/sessions/{id}` | | session record |
//! | GET | `/sessions/{id}/transcript` | | turn records |
//! | GET | `/metrics?metric=&groupBy=&granularity=&from=&to=&user=&application=` | | `{buckets}` |
//! | GET | `/attributes?scope=&key=` | | `{name: value}` |
//!
//! A turn posted while another turn of the same session is in flight is
//! rejected with 409.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::registry::AppRegistry;
use crate::engine::{AppError, Application, Engine, EngineError, Session, SessionOptions, TurnInput};
use crate::model::{parse_bundle, Scope};
use crate::store::{MetricQuery, MetricSeries, SessionRecord, StoreError, TurnRecord};
use crate::value::Value;

const MAX_BUNDLE_BYTES: usize = 16 * 1024 * 1024;

struct SessionSlot {
    app: Arc<Application>,
    busy: AtomicBool,
    session: Mutex<Session>,
}

struct BusyGuard(Arc<SessionSlot>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

pub struct ServiceState {
    pub registry: Arc<AppRegistry>,
    pub engine: Arc<Engine>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

impl ServiceState {
    pub fn new(registry: Arc<AppRegistry>, engine: Arc<Engine>) -> Arc<Self> {
        Arc::new(ServiceState {
            registry,
            engine,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn slot(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.message, "details": self.details});
        (self.status, Json(body)).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        match &e {
            AppError::Parse(_) => ApiError::bad_request(e.to_string()),
            AppError::Invalid(diagnostics) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                message: "bundle is invalid".into(),
                details: diagnostics.iter().map(|d| d.to_string()).collect(),
            },
            AppError::Train(_) | AppError::PackMismatch(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::SessionEnded => StatusCode::GONE,
            EngineError::WrongApplication(_) => StatusCode::CONFLICT,
            EngineError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}"))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/applications", post(upload_application).get(list_applications))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(session_record))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/metrics", get(metrics))
        .route("/attributes", get(attributes))
        .with_state(state)
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct UploadQuery {
    app_id: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct UploadReply {
    app_id: String,
}

async fn bundle_text(request: Request) -> Result<String, ApiError> {
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let bytes = if is_multipart {
        let mut form = Multipart::from_request(request, &())
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let field = form
            .next_field()
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?
            .ok_or_else(|| ApiError::bad_request("multipart body has no bundle field"))?;
        field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?
    } else {
        axum::body::to_bytes(request.into_body(), MAX_BUNDLE_BYTES)
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::bad_request("bundle is not UTF-8"))
}

async fn upload_application(
    State(state): State<Arc<ServiceState>>,
    Query(query): Query<UploadQuery>,
    request: Request,
) -> Result<(StatusCode, Json<UploadReply>), ApiError> {
    let text = bundle_text(request).await?;
    let registry = state.registry.clone();
    let app_id = tokio::task::spawn_blocking(move || -> Result<String, AppError> {
        let bundle = parse_bundle(&text)?;
        let id = query.app_id.unwrap_or_else(|| bundle.main_dialogue_id.clone());
        let app = Application::build(id.clone(), bundle)?;
        registry.insert(app);
        Ok(id)
    })
    .await
    .map_err(join_error)??;
    Ok((StatusCode::CREATED, Json(UploadReply { app_id })))
}

async fn list_applications(State(state): State<Arc<ServiceState>>) -> Json<Vec<String>> {
    Json(state.registry.ids())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StartRequest {
    app_id: String,
    #[serde(default)]
    user_id: Option<String>,
    #[serde(default)]
    community: Option<String>,
    client: String,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StartReply {
    session_id: String,
    responses: Vec<String>,
    ended: bool,
}

async fn start_session(
    State(state): State<Arc<ServiceState>>,
    Json(request): Json<StartRequest>,
) -> Result<(StatusCode, Json<StartReply>), ApiError> {
    let app = state
        .registry
        .get(&request.app_id)
        .ok_or_else(|| ApiError::not_found("application"))?;
    let options = SessionOptions {
        user_id: request.user_id.unwrap_or_else(|| "anonymous".into()),
        community: request.community.unwrap_or_else(|| "default".into()),
        client_tag: request.client,
        seed: request.seed,
        session_id: None,
    };
    let worker_state = state.clone();
    let reply = tokio::task::spawn_blocking(move || -> Result<StartReply, ApiError> {
        let (session, result) = worker_state.engine.start_session(&app, options)?;
        let id = session.id.clone();
        let slot = Arc::new(SessionSlot {
            app,
            busy: AtomicBool::new(false),
            session: Mutex::new(session),
        });
        worker_state
            .sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), slot);
        Ok(StartReply {
            session_id: id,
            responses: result.responses,
            ended: result.ended,
        })
    })
    .await
    .map_err(join_error)??;
    Ok((StatusCode::CREATED, Json(reply)))
}

#[derive(Deserialize)]
struct TurnRequest {
    #[serde(default)]
    utterance: String,
}

#[derive(Serialize)]
struct TurnReply {
    responses: Vec<String>,
    ended: bool,
}

async fn post_turn(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    Json(request): Json<TurnRequest>,
) -> Result<Json<TurnReply>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found("session"))?;
    if slot
        .busy
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .is_err()
    {
        return Err(ApiError::new(StatusCode::CONFLICT, "a turn is already in progress"));
    }
    let guard = BusyGuard(slot);
    let engine = state.engine.clone();
    let result = tokio::task::spawn_blocking(move || {
        let slot = &guard.0;
        let mut session = slot.session.lock().unwrap_or_else(|e| e.into_inner());
        engine.process_turn(&slot.app, &mut session, TurnInput::text(request.utterance))
    })
    .await
    .map_err(join_error)??;
    Ok(Json(TurnReply {
        responses: result.responses,
        ended: result.ended,
    }))
}

async fn session_record(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionRecord>, ApiError> {
    state
        .engine
        .store()
        .session(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("session"))
}

async fn transcript(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
) -> Result<Json<Vec<TurnRecord>>, ApiError> {
    Ok(Json(state.engine.store().get_transcript(&id)?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct MetricsParams {
    metric: String,
    group_by: Option<String>,
    granularity: Option<String>,
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
    user: Option<String>,
    application: Option<String>,
}

async fn metrics(
    State(state): State<Arc<ServiceState>>,
    Query(params): Query<MetricsParams>,
) -> Result<Json<MetricSeries>, ApiError> {
    let bad = |e: crate::store::MetricError| ApiError::bad_request(e.to_string());
    let query = MetricQuery {
        metric: params.metric.parse().map_err(bad)?,
        group_by: params.group_by.as_deref().unwrap_or("none").parse().map_err(bad)?,
        granularity: params.granularity.as_deref().unwrap_or("day").parse().map_err(bad)?,
        from: params.from.unwrap_or(DateTime::UNIX_EPOCH),
        to: params.to.unwrap_or(DateTime::<Utc>::MAX_UTC),
        user: params.user,
        application: params.application,
    };
    Ok(Json(state.engine.store().query_metrics(&query).map_err(bad)?))
}

#[derive(Deserialize)]
struct AttributeParams {
    scope: String,
    key: String,
}

async fn attributes(
    State(state): State<Arc<ServiceState>>,
    Query(params): Query<AttributeParams>,
) -> Result<Json<BTreeMap<String, Value>>, ApiError> {
    let scope = match Scope::from_keyword(&params.scope) {
        Some(scope @ (Scope::User | Scope::Community)) => scope,
        _ => return Err(ApiError::bad_request("scope must be `user` or `community`")),
    };
    Ok(Json(state.engine.store().list_attributes(scope, &params.key)))
}
