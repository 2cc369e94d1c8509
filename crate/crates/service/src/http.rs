//! REST facade over [`Session`]s.
//!
//! Requests for one session are serialized by a per-session lock; different
//! sessions proceed in parallel. Mutating endpoints honor an
//! `Idempotency-Key` header by replaying the stored response.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mvpart::mesh::MeshFormat;
use mvpart::pipeline::PipelineConfig;
use mvpart::render::ViewConfig;
use mvpart::segment::Prompt;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

use crate::session::{parse_mesh_bytes, ProviderKind, PromptEvent, Session, SessionDir, SessionError};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub views: ViewConfig,
    pub pipeline: PipelineConfig,
    pub default_provider: ProviderKind,
    pub angle_thresh_deg: f64,
    pub max_upload_bytes: usize,
    pub max_faces: usize,
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig::default();
        // Interactive sessions keep unprompted faces unlabeled.
        pipeline.post.fill = false;
        Self {
            views: ViewConfig::default(),
            pipeline,
            default_provider: ProviderKind::RegionGrow,
            angle_thresh_deg: mvpart::segment::DEFAULT_ANGLE_THRESH_DEG,
            max_upload_bytes: 64 << 20,
            max_faces: 200_000,
            data_dir: None,
        }
    }
}

/// A finished response kept for idempotent retries.
#[derive(Debug, Clone)]
struct Stored {
    status: StatusCode,
    content_type: &'static str,
    body: Bytes,
}

impl Stored {
    fn json(status: StatusCode, value: serde_json::Value) -> Self {
        Self {
            status,
            content_type: "application/json",
            body: Bytes::from(serde_json::to_vec(&value).expect("json serializes")),
        }
    }

    fn error(e: &SessionError) -> Self {
        Self::json(status_of(e), json!({ "error": e.to_string() }))
    }
}

impl IntoResponse for Stored {
    fn into_response(self) -> Response {
        (self.status, [(header::CONTENT_TYPE, HeaderValue::from_static(self.content_type))], self.body).into_response()
    }
}

fn status_of(e: &SessionError) -> StatusCode {
    match e {
        SessionError::Mesh(_) | SessionError::GroundTruth(_) => StatusCode::UNPROCESSABLE_ENTITY,
        SessionError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
        SessionError::Prompt(_) | SessionError::NoMaskDir => StatusCode::BAD_REQUEST,
        SessionError::NoGroundTruth | SessionError::EmptyHistory => StatusCode::CONFLICT,
        SessionError::NoSuchView(_) => StatusCode::NOT_FOUND,
        SessionError::Pipeline(_) | SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn not_found(id: &str) -> Stored {
    Stored::json(StatusCode::NOT_FOUND, json!({ "error": format!("unknown session {id}") }))
}

fn bad_request(message: String) -> Stored {
    Stored::json(StatusCode::BAD_REQUEST, json!({ "error": message }))
}

struct Slot {
    session: Session,
    replies: HashMap<String, Stored>,
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    next_id: AtomicU64,
    create_replies: Mutex<HashMap<String, Stored>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            create_replies: Mutex::new(HashMap::new()),
        }
    }

    /// Restores every session persisted under the configured data directory.
    pub fn load(config: ServiceConfig) -> Result<Self, SessionError> {
        let state = Self::new(config);
        let Some(dir) = state.config.data_dir.clone() else {
            return Ok(state);
        };
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut max_id = 0;
        let mut entries: Vec<_> = std::fs::read_dir(&dir)?.filter_map(Result::ok).collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let id = entry.file_name().to_string_lossy().into_owned();
            let paths = SessionDir::new(&dir, &id);
            if !paths.mesh_path().is_file() {
                continue;
            }
            let (mesh, _) = parse_mesh_bytes(&std::fs::read(paths.mesh_path())?, Some(MeshFormat::Obj))?;
            let mut session = Session::new(id.clone(), &mesh, &state.config.views, state.config.pipeline.clone())?;
            if let Ok(bytes) = std::fs::read(paths.gt_path()) {
                let gt: Vec<i32> = serde_json::from_slice(&bytes).map_err(|e| SessionError::GroundTruth(e.to_string()))?;
                session.set_ground_truth(gt)?;
            }
            if let Ok(bytes) = std::fs::read(paths.prompts_path()) {
                let history = serde_json::from_slice(&bytes).map_err(|e| SessionError::GroundTruth(e.to_string()))?;
                session.restore_history(history)?;
            }
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            tracing::info!(session = %id, prompts = session.history.len(), "restored session");
            sessions.insert(
                id,
                Arc::new(Mutex::new(Slot {
                    session,
                    replies: HashMap::new(),
                })),
            );
        }
        *state.sessions.try_write().expect("not shared yet") = sessions;
        state.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(state)
    }

    async fn slot(&self, id: &str) -> Option<Arc<Mutex<Slot>>> {
        self.sessions.read().await.get(id).cloned()
    }

    fn persist(&self, session: &Session) {
        if let Some(dir) = &self.config.data_dir {
            if let Err(e) = SessionDir::new(dir, &session.id).write_state(session) {
                tracing::warn!(session = %session.id, error = %e, "could not persist session");
            }
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_summary))
        .route("/sessions/:id/views", get(get_views))
        .route("/sessions/:id/views/:k/normal.png", get(get_normal))
        .route("/sessions/:id/views/:k/overlay.png", get(get_overlay))
        .route("/sessions/:id/gt", post(post_gt))
        .route("/sessions/:id/prompts", post(post_prompt))
        .route("/sessions/:id/undo", post(post_undo))
        .route("/sessions/:id/segmentation", get(get_segmentation))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned)
}

/// Runs `f` on the locked slot in a blocking thread.
async fn with_slot<F>(state: &AppState, id: &str, f: F) -> Stored
where
    F: FnOnce(&mut Slot) -> Stored + Send + 'static,
{
    let Some(slot) = state.slot(id).await else {
        return not_found(id);
    };
    let mut guard = slot.lock_owned().await;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .unwrap_or_else(|e| Stored::json(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))
}

/// Like [`with_slot`] for mutations: replays a stored reply for a repeated
/// idempotency key and persists the session afterwards.
async fn mutate<F>(state: Arc<AppState>, id: &str, route: &str, headers: &HeaderMap, f: F) -> Stored
where
    F: FnOnce(&mut Session) -> Stored + Send + 'static,
{
    let key = idempotency_key(headers).map(|k| format!("{route} {k}"));
    let st = state.clone();
    with_slot(&state, id, move |slot| {
        if let Some(stored) = key.as_ref().and_then(|k| slot.replies.get(k)) {
            return stored.clone();
        }
        let reply = f(&mut slot.session);
        if reply.status.is_success() {
            st.persist(&slot.session);
        }
        if let Some(k) = key {
            slot.replies.insert(k, reply.clone());
        }
        reply
    })
    .await
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    format: Option<String>,
}

fn build_session(state: &AppState, bytes: &[u8], format: Option<MeshFormat>) -> Result<Session, SessionError> {
    let (mesh, part_ids) = parse_mesh_bytes(bytes, format)?;
    if mesh.face_count() > state.config.max_faces {
        return Err(SessionError::TooLarge {
            faces: mesh.face_count(),
            limit: state.config.max_faces,
        });
    }
    let id = format!("s{:06}", state.next_id.fetch_add(1, Ordering::SeqCst));
    let mut session = Session::new(id, &mesh, &state.config.views, state.config.pipeline.clone())?;
    if let Some(gt) = part_ids.filter(|l| l.iter().all(|&x| x >= 0)) {
        session.set_ground_truth(gt)?;
    }
    if let Some(dir) = &state.config.data_dir {
        let paths = SessionDir::new(dir, &session.id);
        paths.write_mesh(&mesh)?;
        paths.write_state(&session)?;
    }
    Ok(session)
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Query(q): Query<UploadQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Stored {
    let format = match q.format.as_deref().map(str::parse::<MeshFormat>).transpose() {
        Ok(f) => f,
        Err(e) => return bad_request(e.to_string()),
    };
    let key = idempotency_key(&headers);
    // Held across creation so a retried key cannot create a second session.
    let mut replies = match key {
        Some(_) => Some(state.create_replies.lock().await),
        None => None,
    };
    if let (Some(k), Some(r)) = (&key, &replies) {
        if let Some(stored) = r.get(k) {
            return stored.clone();
        }
    }
    let st = state.clone();
    let built = tokio::task::spawn_blocking(move || build_session(&st, &body, format)).await;
    let reply = match built {
        Ok(Ok(session)) => {
            let body = json!({
                "session_id": session.id,
                "face_count": session.scene.mesh.face_count(),
                "has_ground_truth": session.gt.is_some(),
                "views": session.views(),
            });
            let id = session.id.clone();
            tracing::info!(session = %id, faces = session.scene.mesh.face_count(), "created session");
            state.sessions.write().await.insert(
                id,
                Arc::new(Mutex::new(Slot {
                    session,
                    replies: HashMap::new(),
                })),
            );
            Stored::json(StatusCode::CREATED, body)
        }
        Ok(Err(e)) => Stored::error(&e),
        Err(e) => Stored::json(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
    };
    if let (Some(k), Some(r)) = (key, replies.as_mut()) {
        r.insert(k, reply.clone());
    }
    reply
}

async fn get_summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Stored {
    with_slot(&state, &id, |slot| Stored::json(StatusCode::OK, json!(slot.session.summary()))).await
}

async fn get_views(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Stored {
    with_slot(&state, &id, |slot| Stored::json(StatusCode::OK, json!({ "views": slot.session.views() }))).await
}

fn png(result: Result<Vec<u8>, SessionError>) -> Stored {
    match result {
        Ok(bytes) => Stored {
            status: StatusCode::OK,
            content_type: "image/png",
            body: bytes.into(),
        },
        Err(e) => Stored::error(&e),
    }
}

async fn get_normal(State(state): State<Arc<AppState>>, Path((id, k)): Path<(String, usize)>) -> Stored {
    with_slot(&state, &id, move |slot| png(slot.session.normal_png(k))).await
}

async fn get_overlay(State(state): State<Arc<AppState>>, Path((id, k)): Path<(String, usize)>) -> Stored {
    with_slot(&state, &id, move |slot| png(slot.session.overlay_png(k))).await
}

#[derive(Debug, Deserialize)]
struct GtBody {
    labels: Vec<i32>,
}

async fn post_gt(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Stored {
    let parsed: Result<GtBody, _> = serde_json::from_slice(&body);
    mutate(state, &id, "gt", &headers, move |session| {
        let gt = match parsed {
            Ok(b) => b,
            Err(e) => return Stored::error(&SessionError::GroundTruth(e.to_string())),
        };
        match session.set_ground_truth(gt.labels) {
            Ok(()) => Stored::json(StatusCode::OK, json!(session.summary())),
            Err(e) => Stored::error(&e),
        }
    })
    .await
}

/// A prompt plus the provider that should answer it.
#[derive(Debug, Deserialize)]
pub struct PromptRequest {
    #[serde(flatten)]
    pub prompt: Prompt,
    pub provider: Option<ProviderKind>,
    pub angle_thresh_deg: Option<f64>,
    pub mask_dir: Option<PathBuf>,
}

async fn post_prompt(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> Stored {
    let req: PromptRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            if state.slot(&id).await.is_none() {
                return not_found(&id);
            }
            return bad_request(format!("invalid prompt: {e}"));
        }
    };
    let event = PromptEvent {
        prompt: req.prompt,
        provider: req.provider.unwrap_or(state.config.default_provider),
        angle_thresh_deg: req.angle_thresh_deg.unwrap_or(state.config.angle_thresh_deg),
        mask_dir: req.mask_dir,
    };
    mutate(state, &id, "prompts", &headers, move |session| match session.apply(event) {
        Ok(()) => Stored::json(StatusCode::OK, json!(session.summary())),
        Err(e) => Stored::error(&e),
    })
    .await
}

async fn post_undo(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> Stored {
    mutate(state, &id, "undo", &headers, |session| match session.undo() {
        Ok(()) => Stored::json(StatusCode::OK, json!(session.summary())),
        Err(e) => Stored::error(&e),
    })
    .await
}

#[derive(Debug, Deserialize)]
struct SegmentationQuery {
    format: Option<String>,
}

async fn get_segmentation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<SegmentationQuery>,
) -> Stored {
    let format = q.format.unwrap_or_else(|| "json".into());
    with_slot(&state, &id, move |slot| {
        let s = &slot.session;
        match format.as_str() {
            "json" => Stored {
                status: StatusCode::OK,
                content_type: "application/json",
                body: s.labels_json().into(),
            },
            "ply" => Stored {
                status: StatusCode::OK,
                content_type: "application/octet-stream",
                body: s.labels_ply().into(),
            },
            "rendered" => {
                let views: Vec<_> = s
                    .views()
                    .into_iter()
                    .map(|v| json!({ "index": v.index, "image_url": v.overlay_url }))
                    .collect();
                Stored::json(StatusCode::OK, json!({ "views": views, "palette": s.palette() }))
            }
            other => bad_request(format!("unknown format {other:?}; use json, ply or rendered")),
        }
    })
    .await
}
