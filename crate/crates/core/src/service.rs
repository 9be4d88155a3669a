//! Local JSON-over-HTTP API around one [`ClusterSession`].
//!
//! Every successful mutation bumps the session revision. Mutating requests
//! carry the revision they were based on and are refused with 409 when it
//! is stale. Mutations hold the write lock, so they are serialized; reads
//! share the read lock and always see one consistent revision.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::RwLock;

use crate::export::{
    export_git, plan_export, ExportBundle, ExportError, ExportedRepo, DEFAULT_MESSAGE_TEMPLATE,
};
use crate::model::{BeadId, Cluster, ClusterId, FineHistory, Partition};
use crate::session::{AugmentedDiff, ClusterSession, MapPoint, SessionError};

pub const DEFAULT_PORT: u16 = 7413;

/// What gets saved on shutdown and read back on resume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSidecar {
    pub revision: u64,
    pub next_cluster_id: u32,
    pub partition: Partition,
}

impl SessionSidecar {
    /// `<input>.cbt-session.json`, next to the input.
    pub fn path_for(input: &Path) -> PathBuf {
        let mut name = input
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_else(|| "session".into());
        name.push(".cbt-session.json");
        input.with_file_name(name)
    }
}

struct Inner {
    session: ClusterSession,
    revision: u64,
}

/// Shared state behind the router.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<RwLock<Inner>>,
    assets: Option<PathBuf>,
}

impl AppState {
    pub fn new(session: ClusterSession) -> Self {
        AppState::resume(session, 0)
    }

    pub fn resume(session: ClusterSession, revision: u64) -> Self {
        AppState {
            inner: Arc::new(RwLock::new(Inner { session, revision })),
            assets: None,
        }
    }

    /// Serves UI files from `dir` instead of the built-in placeholder page.
    pub fn with_assets(mut self, dir: impl Into<PathBuf>) -> Self {
        self.assets = Some(dir.into());
        self
    }

    pub async fn sidecar(&self) -> SessionSidecar {
        let inner = self.inner.read().await;
        SessionSidecar {
            revision: inner.revision,
            next_cluster_id: inner.session.state().next_cluster_id,
            partition: inner.session.partition().clone(),
        }
    }

    pub async fn revision(&self) -> u64 {
        self.inner.read().await.revision
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    StaleRevision { expected: u64, current: u64 },
    Session(SessionError),
    Export(ExportError),
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        ApiError::Export(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "bad_request", "message": message}),
            ),
            ApiError::StaleRevision { expected, current } => (
                StatusCode::CONFLICT,
                json!({
                    "error": "stale_revision",
                    "message": format!("request is based on revision {expected}, session is at {current}"),
                    "revision": current,
                }),
            ),
            ApiError::Session(e) => {
                let message = e.to_string();
                match e {
                    SessionError::UnknownCluster(id) => (
                        StatusCode::NOT_FOUND,
                        json!({"error": "unknown_cluster", "message": message, "cluster_id": id}),
                    ),
                    SessionError::SelectionPatchConflict {
                        seq,
                        bead,
                        blocking_seq,
                        blocking_bead,
                    } => (
                        StatusCode::CONFLICT,
                        json!({
                            "error": "selection_patch_conflict",
                            "message": message,
                            "seq": seq,
                            "bead_id": bead,
                            "blocking_seq": blocking_seq,
                            "blocking_bead_id": blocking_bead,
                        }),
                    ),
                    SessionError::NothingToUndo | SessionError::NothingToRedo => (
                        StatusCode::CONFLICT,
                        json!({"error": "nothing_to_do", "message": message}),
                    ),
                    _ => (
                        StatusCode::BAD_REQUEST,
                        json!({"error": "invalid_operation", "message": message}),
                    ),
                }
            }
            ApiError::Export(e) => {
                let message = e.to_string();
                match e {
                    ExportError::CyclicClusterDependency { clusters, witnesses } => (
                        StatusCode::CONFLICT,
                        json!({
                            "error": "cyclic_cluster_dependency",
                            "message": message,
                            "clusters": clusters,
                            "witnesses": witnesses,
                        }),
                    ),
                    ExportError::OutputExists(_) => (
                        StatusCode::BAD_REQUEST,
                        json!({"error": "output_exists", "message": message}),
                    ),
                    _ => (
                        StatusCode::INTERNAL_SERVER_ERROR,
                        json!({"error": "export_failed", "message": message}),
                    ),
                }
            }
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterView {
    pub id: ClusterId,
    pub color: String,
    pub bead_ids: Vec<BeadId>,
}

impl From<&Cluster> for ClusterView {
    fn from(c: &Cluster) -> Self {
        ClusterView {
            id: c.id,
            color: c.color.clone(),
            bead_ids: c.bead_ids.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub revision: u64,
    pub beads: Vec<MapPoint>,
    pub clusters: Vec<ClusterView>,
    pub can_undo: bool,
    pub can_redo: bool,
}

#[derive(Debug, Deserialize)]
pub struct SplitRequest {
    pub revision: u64,
    pub cluster_id: ClusterId,
    pub bead_ids: Vec<BeadId>,
}

#[derive(Debug, Deserialize)]
pub struct MergeRequest {
    pub revision: u64,
    pub cluster_ids: Vec<ClusterId>,
}

#[derive(Debug, Deserialize)]
pub struct RevisionRequest {
    pub revision: u64,
}

#[derive(Debug, Deserialize)]
pub struct ExportRequest {
    pub out_path: PathBuf,
    #[serde(default)]
    pub message_template: Option<String>,
    /// Also write `export.json` next to the repository.
    #[serde(default)]
    pub bundle_path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
pub struct DiffQuery {
    pub clusters: String,
    #[serde(default)]
    pub context: Option<usize>,
}

fn check_revision(inner: &Inner, revision: u64) -> Result<(), ApiError> {
    if revision != inner.revision {
        return Err(ApiError::StaleRevision {
            expected: revision,
            current: inner.revision,
        });
    }
    Ok(())
}

fn cluster_view(session: &ClusterSession, id: ClusterId) -> ClusterView {
    session
        .partition()
        .cluster(id)
        .expect("id returned by the session")
        .into()
}

async fn get_session(State(state): State<AppState>) -> Json<SessionView> {
    let inner = state.inner.read().await;
    Json(SessionView {
        revision: inner.revision,
        beads: inner.session.project_beads(),
        clusters: inner.session.partition().clusters.iter().map(Into::into).collect(),
        can_undo: inner.session.can_undo(),
        can_redo: inner.session.can_redo(),
    })
}

async fn split(
    State(state): State<AppState>,
    body: Result<Json<SplitRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let mut inner = state.inner.write().await;
    check_revision(&inner, req.revision)?;
    let id = inner.session.split_cluster(req.cluster_id, &req.bead_ids)?;
    inner.revision += 1;
    Ok(Json(json!({
        "revision": inner.revision,
        "new_cluster": cluster_view(&inner.session, id),
    })))
}

async fn merge(
    State(state): State<AppState>,
    body: Result<Json<MergeRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let mut inner = state.inner.write().await;
    check_revision(&inner, req.revision)?;
    let id = inner.session.merge_clusters(&req.cluster_ids)?;
    inner.revision += 1;
    Ok(Json(json!({
        "revision": inner.revision,
        "surviving_cluster": cluster_view(&inner.session, id),
    })))
}

async fn step(
    state: AppState,
    body: Result<Json<RevisionRequest>, JsonRejection>,
    redo: bool,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let mut inner = state.inner.write().await;
    check_revision(&inner, req.revision)?;
    if redo {
        inner.session.redo()?;
    } else {
        inner.session.undo()?;
    }
    inner.revision += 1;
    Ok(Json(json!({"revision": inner.revision})))
}

async fn undo(
    State(state): State<AppState>,
    body: Result<Json<RevisionRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    step(state, body, false).await
}

async fn redo(
    State(state): State<AppState>,
    body: Result<Json<RevisionRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    step(state, body, true).await
}

pub fn parse_cluster_list(text: &str) -> Result<Vec<ClusterId>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map(ClusterId)
                .map_err(|_| format!("invalid cluster id {s:?}"))
        })
        .collect()
}

async fn diff(
    State(state): State<AppState>,
    query: Result<Query<DiffQuery>, QueryRejection>,
) -> Result<Json<AugmentedDiff>, ApiError> {
    let Query(q) = query?;
    let ids = parse_cluster_list(&q.clusters).map_err(ApiError::BadRequest)?;
    let inner = state.inner.read().await;
    Ok(Json(inner.session.augmented_diff(&ids, q.context)?))
}

/// Exports the current partition. Runs on the blocking pool because it
/// shells out to git.
pub fn export_session(
    history: &FineHistory,
    partition: &Partition,
    out: &Path,
    template: &str,
    bundle: Option<&Path>,
) -> Result<ExportedRepo, ExportError> {
    let plan = plan_export(history, partition)?;
    let repo = export_git(&plan, out, template)?;
    if let Some(path) = bundle {
        ExportBundle::new(&plan, template).write(path)?;
    }
    Ok(repo)
}

async fn export(
    State(state): State<AppState>,
    body: Result<Json<ExportRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let (history, partition, revision) = {
        let inner = state.inner.read().await;
        (
            inner.session.history().clone(),
            inner.session.partition().clone(),
            inner.revision,
        )
    };
    let template = req
        .message_template
        .unwrap_or_else(|| DEFAULT_MESSAGE_TEMPLATE.to_string());
    let repo = tokio::task::spawn_blocking(move || {
        export_session(
            &history,
            &partition,
            &req.out_path,
            &template,
            req.bundle_path.as_deref(),
        )
    })
    .await
    .map_err(|e| ApiError::BadRequest(format!("export task failed: {e}")))??;
    Ok(Json(json!({
        "revision": revision,
        "base_commit": repo.base_commit,
        "commits": repo.commits,
    })))
}

const FALLBACK_PAGE: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>cbt</title></head>
<body>
<h1>cbt session</h1>
<p>No UI assets are installed. Start the server with <code>--assets DIR</code> to serve them.</p>
<p>API: <a href=\"/api/session\">/api/session</a>, <code>/api/diff?clusters=1,2</code>,
POST <code>/api/clusters/split</code>, <code>/api/clusters/merge</code>, <code>/api/undo</code>,
<code>/api/redo</code>, <code>/api/export</code>.</p>
</body></html>
";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn static_asset(State(state): State<AppState>, uri: Uri) -> Response {
    let relative = uri.path().trim_start_matches('/');
    let relative = if relative.is_empty() { "index.html" } else { relative };
    let Some(dir) = &state.assets else {
        return if relative == "index.html" {
            ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], FALLBACK_PAGE).into_response()
        } else {
            StatusCode::NOT_FOUND.into_response()
        };
    };
    let rel = Path::new(relative);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = dir.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/clusters/split", post(split))
        .route("/api/clusters/merge", post(merge))
        .route("/api/diff", get(diff))
        .route("/api/undo", post(undo))
        .route("/api/redo", post(redo))
        .route("/api/export", post(export))
        .fallback(get(static_asset))
        .with_state(state)
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, ServeError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    tokio::net::TcpListener::bind(addr).await.map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse(port)
        } else {
            ServeError::Bind { addr, source }
        }
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
