//! HTTP API over an [`EngineSnapshot`]. Requests read a shared snapshot;
//! `POST /api/reload` rebuilds it from the project configuration and swaps
//! it in whole.

use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::config::ProjectConfig;
use crate::failure::Failure;
use crate::pipeline::{solve, EngineSnapshot, SequenceRequest};

pub struct AppState {
    config: ProjectConfig,
    snapshot: RwLock<Arc<EngineSnapshot>>,
}

impl AppState {
    pub fn new(config: ProjectConfig, snapshot: EngineSnapshot) -> Arc<Self> {
        Arc::new(Self {
            config,
            snapshot: RwLock::new(Arc::new(snapshot)),
        })
    }

    pub fn snapshot(&self) -> Arc<EngineSnapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn replace(&self, next: EngineSnapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/frames", get(frames))
        .route("/api/mst", get(mst))
        .route("/api/embedding", get(embedding))
        .route("/api/outliers", get(outliers))
        .route("/api/sequence", post(sequence))
        .route("/api/reload", post(reload))
        .route("/frames/{id}", get(frame_image))
        .with_state(state)
}

/// JSON body with 17-digit floats, like every file the engine writes.
fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match reseq_core::json::to_vec(value) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => error_response(Failure::from(e)),
    }
}

fn error_response(f: Failure) -> Response {
    let status = match f.exit_code() {
        2 | 3 => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    json(
        status,
        &serde_json::json!({"error": {"kind": f.kind(), "message": f.to_string()}}),
    )
}

#[derive(Serialize)]
struct FrameEntry<'a> {
    id: &'a str,
    outlier: bool,
}

async fn frames(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    let outliers = snap.outliers();
    let list: Vec<FrameEntry> = snap
        .matrix
        .frame_ids()
        .iter()
        .map(|id| FrameEntry {
            id,
            outlier: outliers.contains(id.as_str()),
        })
        .collect();
    json(StatusCode::OK, &list)
}

async fn mst(State(state): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, &state.snapshot().tree.to_json())
}

async fn embedding(State(state): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, &state.snapshot().embedding)
}

#[derive(Serialize)]
struct OutlierView<'a> {
    pruned: bool,
    #[serde(flatten)]
    report: Option<&'a reseq_core::outliers::PruneReport>,
}

async fn outliers(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    json(
        StatusCode::OK,
        &OutlierView {
            pruned: snap.report.is_some(),
            report: snap.report.as_ref(),
        },
    )
}

async fn sequence(State(state): State<Arc<AppState>>, body: axum::body::Bytes) -> Response {
    let req: SequenceRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(Failure::contract(format!("invalid sequence request: {e}"))),
    };
    let snap = state.snapshot();
    let outcome = tokio::task::spawn_blocking(move || {
        let (m, tree) = if req.no_prune {
            (&snap.matrix, None)
        } else {
            (&snap.pruned, Some(&snap.tree))
        };
        solve(&state.config, m, tree, &req)
    })
    .await;
    match outcome {
        Ok(Ok(result)) => json(StatusCode::OK, &result),
        Ok(Err(f)) => error_response(f),
        Err(e) => error_response(Failure::Other(format!("sequencing task failed: {e}"))),
    }
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    let worker = state.clone();
    let built = tokio::task::spawn_blocking(move || EngineSnapshot::build(&worker.config)).await;
    match built {
        Ok(Ok(next)) => {
            let body = serde_json::json!({"frames": next.matrix.n(), "surviving": next.pruned.n()});
            state.replace(next);
            json(StatusCode::OK, &body)
        }
        Ok(Err(f)) => error_response(f),
        Err(e) => error_response(Failure::Other(format!("reload task failed: {e}"))),
    }
}

async fn frame_image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let snap = state.snapshot();
    let source = snap
        .frames
        .as_ref()
        .and_then(|f| f.get(&id))
        .and_then(|f| f.source_path.clone());
    let Some(path) = source else {
        return (StatusCode::NOT_FOUND, Json(serde_json::json!({"error": {"kind": "not-found", "message": format!("no image for frame {id:?}")}}))).into_response();
    };
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "image/png",
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => (StatusCode::OK, [(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response(),
        Err(e) => error_response(Failure::from(e)),
    }
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(state: Arc<AppState>, addr: &str) -> Result<(), Failure> {
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => return Err(Failure::PortInUse(addr.to_owned())),
        Err(e) => return Err(e.into()),
    };
    eprintln!("reseq: serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
