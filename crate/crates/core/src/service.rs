//! JSON-over-HTTP front end. One in-memory session per client; a session
//! runs one command at a time and rejects a second as `Busy`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, TryLockError};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Map, Value as JsonValue};

use crate::registry::value_to_json;
use crate::session::{CommandError, Runtime, Session};
use crate::ui::{ScreenSnapshot, TapPoint, VisibleComponent};
use crate::value::InstanceRef;

pub const IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

struct Slot {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

pub struct ServiceState {
    runtime: Runtime,
    sessions: Mutex<HashMap<String, Slot>>,
    idle_timeout: Duration,
}

impl ServiceState {
    pub fn new(runtime: Runtime) -> Self {
        Self::with_idle_timeout(runtime, IDLE_TIMEOUT)
    }

    pub fn with_idle_timeout(runtime: Runtime, idle_timeout: Duration) -> Self {
        ServiceState {
            runtime,
            sessions: Mutex::new(HashMap::new()),
            idle_timeout,
        }
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").len()
    }

    fn create(&self) -> Result<String, ApiError> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = self
            .runtime
            .new_session(id.clone())
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let mut table = self.sessions.lock().expect("session table poisoned");
        self.expire(&mut table);
        table.insert(
            id.clone(),
            Slot {
                session: Arc::new(Mutex::new(session)),
                last_used: Instant::now(),
            },
        );
        Ok(id)
    }

    fn expire(&self, table: &mut HashMap<String, Slot>) {
        let now = Instant::now();
        table.retain(|id, slot| {
            let keep = now.duration_since(slot.last_used) < self.idle_timeout;
            if !keep {
                log::info!("session {id} expired");
            }
            keep
        });
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut table = self.sessions.lock().expect("session table poisoned");
        self.expire(&mut table);
        let slot = table.get_mut(id).ok_or_else(|| ApiError::unknown_session(id))?;
        slot.last_used = Instant::now();
        Ok(Arc::clone(&slot.session))
    }
}

/// Run `f` on the session unless another request holds it.
fn with_session<T>(session: &Mutex<Session>, f: impl FnOnce(&mut Session) -> T) -> Result<T, ApiError> {
    match session.try_lock() {
        Ok(mut guard) => Ok(f(&mut guard)),
        Err(TryLockError::WouldBlock) => Err(ApiError::busy()),
        Err(TryLockError::Poisoned(_)) => Err(ApiError::internal("session state is corrupted")),
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: CommandError,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            error: CommandError::new(code, message),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`"))
    }

    fn busy() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "Busy",
            "A command is already running for this session.",
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }

    fn bad_body(rejection: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "ValidationError", rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error }))).into_response()
    }
}

type Shared = Arc<ServiceState>;

#[derive(Deserialize)]
struct ScreenBody {
    components: Vec<VisibleComponent>,
}

#[derive(Deserialize)]
struct CommandBody {
    text: String,
    #[serde(default)]
    taps: Vec<TapPoint>,
}

#[derive(Deserialize)]
struct ActionBody {
    class: String,
    #[serde(default)]
    instance_id: Option<String>,
    function: String,
    #[serde(default)]
    args: Map<String, JsonValue>,
}

async fn create_session(State(state): State<Shared>) -> Result<Json<JsonValue>, ApiError> {
    let id = state.create()?;
    Ok(Json(json!({ "session_id": id })))
}

async fn report_screen(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ScreenBody>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(body) = body.map_err(ApiError::bad_body)?;
    let session = state.lookup(&id)?;
    with_session(&session, |s| {
        s.update_screen(ScreenSnapshot::new(id.clone(), body.components))
    })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn command(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<CommandBody>, JsonRejection>,
) -> Result<Json<JsonValue>, ApiError> {
    let Json(body) = body.map_err(ApiError::bad_body)?;
    let session = state.lookup(&id)?;
    let worker = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || {
        with_session(&session, |s| {
            worker.runtime.handle_command(s, &body.text, &body.taps).to_wire()
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(result))
}

async fn action(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ActionBody>, JsonRejection>,
) -> Result<Json<JsonValue>, ApiError> {
    let Json(body) = body.map_err(ApiError::bad_body)?;
    let session = state.lookup(&id)?;
    let worker = Arc::clone(&state);
    let outcome = tokio::task::spawn_blocking(move || {
        with_session(&session, |s| {
            worker
                .runtime
                .invoke_action(s, &body.class, body.instance_id.as_deref(), &body.function, &body.args)
                .map(|v| json!({ "value": value_to_json(&v), "revision": s.store.revision() }))
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    match outcome {
        Ok(v) => Ok(Json(v)),
        Err(error) => Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            error,
        }),
    }
}

async fn instance_state(
    State(state): State<Shared>,
    Path((id, class, instance_id)): Path<(String, String, String)>,
) -> Result<Json<JsonValue>, ApiError> {
    let session = state.lookup(&id)?;
    with_session(&session, |s| s.store.instance_json(&InstanceRef::new(&class, &instance_id), true))?
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()))
}

async fn class_state(
    State(state): State<Shared>,
    Path((id, class)): Path<(String, String)>,
) -> Result<Json<JsonValue>, ApiError> {
    let session = state.lookup(&id)?;
    with_session(&session, |s| {
        let refs = s.store.all(&class)?;
        refs.iter()
            .map(|r| s.store.instance_json(r, true))
            .collect::<Result<Vec<_>, _>>()
    })?
    .map(|items| Json(JsonValue::Array(items)))
    .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()))
}

async fn history(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let session = state.lookup(&id)?;
    let entries = with_session(&session, |s| serde_json::to_value(&s.history))?
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(entries))
}

async fn schema(State(state): State<Shared>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        state.runtime.prompts().schema(),
    )
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/screen", post(report_screen))
        .route("/api/session/{id}/command", post(command))
        .route("/api/session/{id}/action", post(action))
        .route("/api/session/{id}/history", get(history))
        .route("/api/session/{id}/state/{class}", get(class_state))
        .route("/api/session/{id}/state/{class}/{instance_id}", get(instance_state))
        .route("/api/schema", get(schema))
        .with_state(state)
}

/// Bind and serve until the process exits.
pub async fn serve(runtime: Runtime, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(ServiceState::new(runtime)))).await
}
