//! HTTP front end for linkspace sessions.
//!
//! Every route works on one session created with `POST /sessions`. Payloads
//! are JSON except the CSV uploads and the assignments download.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use linkspace::data::RoleSpec;
use linkspace::session::{Coloring, CoordinateViewOptions, Panel, Session, SessionError, SessionManager, TourSpec};
use linkspace::tour::SliceThickness;
use serde::Deserialize;
use serde_json::{json, Value};

/// Shared state of the service.
#[derive(Clone, Default)]
pub struct AppState {
    pub sessions: Arc<SessionManager>,
}

impl AppState {
    pub fn new(sessions: SessionManager) -> Self {
        Self {
            sessions: Arc::new(sessions),
        }
    }
}

/// A [`SessionError`] rendered as `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError(pub SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

fn error_kind(e: &SessionError) -> (StatusCode, &'static str) {
    use SessionError::*;
    match e {
        UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
        UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
        NoTour(_) => (StatusCode::NOT_FOUND, "no_tour"),
        NoData => (StatusCode::CONFLICT, "no_data"),
        Schema { .. } => (StatusCode::BAD_REQUEST, "schema"),
        InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        InvalidConfig(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
        InvalidSelection { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_selection"),
        Data(_) => (StatusCode::UNPROCESSABLE_ENTITY, "data"),
        Cluster(_) => (StatusCode::UNPROCESSABLE_ENTITY, "cluster"),
        Tour(_) => (StatusCode::UNPROCESSABLE_ENTITY, "tour"),
        Nldr(_) => (StatusCode::UNPROCESSABLE_ENTITY, "nldr"),
        Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = error_kind(&self.0);
        let mut body = json!({"error": kind, "message": self.0.to_string()});
        if let SessionError::Schema { path, .. } = &self.0 {
            body["path"] = json!(path);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(SessionError::InvalidRequest(message.into()))
}

fn session(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    Ok(state.sessions.get(id)?)
}

/// Runs `f` on the blocking pool and serializes its result.
async fn blocking<T, F>(f: F) -> ApiResult<Json<Value>>
where
    T: serde::Serialize,
    F: FnOnce() -> Result<T, SessionError> + Send + 'static,
{
    let value = tokio::task::spawn_blocking(move || f().map(|v| serde_json::to_value(v).expect("payloads serialize")))
        .await
        .map_err(|e| ApiError(SessionError::Io(e.to_string())))??;
    Ok(Json(value))
}

/// Parses a JSON request body; an empty body reads as `{}`.
fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| bad_request(format!("request body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe).delete(delete_session))
        .route("/sessions/{id}/data", post(upload_data))
        .route("/sessions/{id}/distances", post(upload_distances))
        .route("/sessions/{id}/config", get(get_config).patch(patch_config))
        .route("/sessions/{id}/overview", get(overview))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/benchmarks", get(benchmarks))
        .route("/sessions/{id}/coordinates", get(coordinates))
        .route("/sessions/{id}/breakdown", get(breakdown))
        .route("/sessions/{id}/comparison", get(comparison))
        .route("/sessions/{id}/jobs/embedding", post(start_embedding))
        .route("/sessions/{id}/jobs/tour", post(start_tour))
        .route("/sessions/{id}/jobs/{job}", get(job_status).delete(cancel_job))
        .route("/sessions/{id}/selection", get(get_selection).put(put_selection))
        .route("/sessions/{id}/tours/{panel}", get(get_tour))
        .route("/sessions/{id}/tours/{panel}/copy", post(copy_tour))
        .route("/sessions/{id}/tours/{panel}/hold", post(hold))
        .route("/sessions/{id}/tours/{panel}/slice", get(slice))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<Value>) {
    let id = state.sessions.create();
    (StatusCode::CREATED, Json(json!({ "id": id })))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.sessions.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn describe(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let summary = match s.summary() {
        Ok(sum) => Some(sum),
        Err(SessionError::NoData) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Json(json!({
        "id": s.id,
        "revision": s.revision(),
        "summary": summary,
        "selection": s.selection(),
        "methods": s.registry().names(),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadBody {
    csv: String,
    #[serde(default)]
    roles: Option<RoleSpec>,
}

/// Accepts either raw CSV (roles from the settings) or
/// `{"csv": ..., "roles": ...}`.
async fn upload_data(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (csv, roles) = if is_json {
        let b: UploadBody = parse_json(&body)?;
        (b.csv.into_bytes(), b.roles)
    } else {
        (body.to_vec(), None)
    };
    blocking(move || s.upload_data(&csv, roles)).await
}

async fn upload_distances(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.upload_distances(&body).map(|n| json!({ "n": n }))).await
}

async fn get_config(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let doc = s.config().to_canonical_json();
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

async fn patch_config(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let patch: Value = parse_json(&body)?;
    blocking(move || s.set_config(&patch)).await
}

async fn overview(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.overview()).await
}

#[derive(Deserialize)]
struct StatsQuery {
    k_max: Option<usize>,
}

async fn stats(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<StatsQuery>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.stats(q.k_max)).await
}

async fn benchmarks(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.benchmarks()).await
}

#[derive(Deserialize)]
struct CoordinatesQuery {
    variable: String,
    #[serde(default)]
    center: bool,
    #[serde(default)]
    scale: bool,
    /// Comma-separated 1-based clusters to leave out.
    #[serde(default)]
    hidden: String,
}

async fn coordinates(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CoordinatesQuery>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let hidden = q
        .hidden
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<usize>().map_err(|_| bad_request(format!("bad cluster `{v}` in hidden"))))
        .collect::<ApiResult<Vec<_>>>()?;
    let opts = CoordinateViewOptions {
        center: q.center,
        scale: q.scale,
        hidden,
    };
    blocking(move || s.coordinate_view(&q.variable, &opts)).await
}

#[derive(Deserialize)]
struct BreakdownQuery {
    cluster: usize,
}

async fn breakdown(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<BreakdownQuery>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.breakdown(q.cluster)).await
}

async fn comparison(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    blocking(move || s.comparison()).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingRequest {
    panel: Panel,
    #[serde(default)]
    method: Option<String>,
}

async fn start_embedding(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let s = session(&state, &id)?;
    let req: EmbeddingRequest = parse_json(&body)?;
    let status = tokio::task::spawn_blocking(move || s.start_embedding(req.panel, req.method.as_deref()))
        .await
        .map_err(|e| ApiError(SessionError::Io(e.to_string())))??;
    Ok((StatusCode::ACCEPTED, Json(serde_json::to_value(status).expect("status serializes"))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TourRequest {
    panel: Panel,
    #[serde(default)]
    spec: Option<TourSpec>,
}

async fn start_tour(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let s = session(&state, &id)?;
    let req: TourRequest = parse_json(&body)?;
    let status = tokio::task::spawn_blocking(move || s.start_tour(req.panel, req.spec))
        .await
        .map_err(|e| ApiError(SessionError::Io(e.to_string())))??;
    Ok((StatusCode::ACCEPTED, Json(serde_json::to_value(status).expect("status serializes"))))
}

#[derive(Deserialize)]
struct JobQuery {
    /// Seconds to wait for the job to finish before answering.
    #[serde(default)]
    wait: Option<f64>,
}

async fn job_status(
    State(state): State<AppState>,
    Path((id, job)): Path<(String, String)>,
    Query(q): Query<JobQuery>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    match q.wait {
        Some(secs) if secs > 0.0 => {
            let timeout = Duration::from_secs_f64(secs.min(300.0));
            blocking(move || s.wait_job(&job, timeout)).await
        }
        _ => Ok(Json(serde_json::to_value(s.job_status(&job)?).expect("status serializes"))),
    }
}

async fn cancel_job(State(state): State<AppState>, Path((id, job)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    Ok(Json(serde_json::to_value(s.cancel_job(&job)?).expect("status serializes")))
}

async fn get_selection(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    Ok(Json(serde_json::to_value(s.selection()).expect("selection serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionRequest {
    ids: Vec<usize>,
    #[serde(default)]
    origin: String,
}

async fn put_selection(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let req: SelectionRequest = parse_json(&body)?;
    Ok(Json(serde_json::to_value(s.set_selection(&req.ids, &req.origin)?).expect("selection serializes")))
}

fn panel(raw: &str) -> ApiResult<Panel> {
    Ok(raw.parse::<Panel>()?)
}

async fn get_tour(State(state): State<AppState>, Path((id, p)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let p = panel(&p)?;
    blocking(move || s.tour(p)).await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CopyRequest {
    #[serde(default)]
    coloring: Option<Coloring>,
}

async fn copy_tour(State(state): State<AppState>, Path((id, p)): Path<(String, String)>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let p = panel(&p)?;
    let req: CopyRequest = parse_json(&body)?;
    blocking(move || s.copy_tour(p, req.coloring)).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HoldRequest {
    position: usize,
}

async fn hold(State(state): State<AppState>, Path((id, p)): Path<(String, String)>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let p = panel(&p)?;
    let req: HoldRequest = parse_json(&body)?;
    blocking(move || s.hold_frame(p, req.position)).await
}

#[derive(Deserialize)]
struct SliceQuery {
    position: usize,
    /// Slice half-width; automatic when absent.
    h: Option<f64>,
}

async fn slice(
    State(state): State<AppState>,
    Path((id, p)): Path<(String, String)>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let p = panel(&p)?;
    let h = q.h.map_or(SliceThickness::Auto, SliceThickness::Fixed);
    blocking(move || s.slice(p, q.position, h)).await
}

#[derive(Deserialize)]
struct ExportQuery {
    /// `csv` returns only the assignments table.
    format: Option<String>,
}

async fn export(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let bundle = tokio::task::spawn_blocking(move || s.export())
        .await
        .map_err(|e| ApiError(SessionError::Io(e.to_string())))??;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(bundle).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], bundle.assignments_csv).into_response()),
        Some(other) => Err(bad_request(format!("unknown export format `{other}`"))),
    }
}

/// Selection and job events as server-sent events, one JSON document per
/// event with the event name set to its type.
async fn events(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let s = session(&state, &id)?;
    let sub = s.subscribe();
    let (tx, rx) = tokio::sync::mpsc::channel(64);
    tokio::task::spawn_blocking(move || loop {
        match sub.recv_timeout(Duration::from_millis(250)) {
            Some(ev) => {
                if tx.blocking_send(ev).is_err() {
                    break;
                }
            }
            None if tx.is_closed() => break,
            None => {}
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let ev = rx.recv().await?;
        let data = serde_json::to_string(&ev).expect("events serialize");
        let name = match ev {
            linkspace::session::SessionEvent::Selection(_) => "selection",
            linkspace::session::SessionEvent::Job { .. } => "job",
        };
        Some((Ok(Event::default().event(name).data(data)), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
