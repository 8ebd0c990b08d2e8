//! HTTP transport: `POST /api/{endpoint}` and `GET /api/events/{job_id}`.

use std::convert::Infallible;
use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;
use tokio::net::TcpListener;

use crate::api::Server;
use crate::error::ApiError;

pub fn router(server: Server) -> Router {
    Router::new()
        .route("/api/events/{job_id}", get(events))
        .route("/api/{endpoint}", post(endpoint))
        .with_state(server)
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(e.to_json())).into_response()
}

async fn endpoint(State(server): State<Server>, Path(name): Path<String>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || {
        let value: Value = serde_json::from_slice(&body)
            .map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?;
        server.handle(&name, &value)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::internal(format!("request handler panicked: {e}"))));
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => error_response(&e),
    }
}

/// Replays the job's backlog, then follows live events until the terminal
/// one. A `Last-Event-ID` header resumes after that sequence number.
async fn events(State(server): State<Server>, Path(job_id): Path<String>, headers: HeaderMap) -> Response {
    let Some(job) = server.job(&job_id) else {
        return error_response(&ApiError::unknown("job", &job_id));
    };
    let start = headers
        .get("last-event-id")
        .and_then(|h| h.to_str().ok())
        .and_then(|s| s.trim().parse::<usize>().ok())
        .map_or(0, |seq| seq + 1);
    let rx = job.subscribe();
    let stream = futures::stream::unfold((job, rx, start, false), |(job, mut rx, next, done)| async move {
        if done {
            return None;
        }
        loop {
            if let Some(ev) = job.event(next) {
                let terminal = ev.kind.is_terminal();
                let data = serde_json::to_string(&ev).expect("event serializes");
                let sse = Event::default().event(ev.kind.name()).id(ev.seq.to_string()).data(data);
                return Some((Ok::<_, Infallible>(sse), (job, rx, next + 1, terminal)));
            }
            if job.exhausted(next) || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default()).into_response()
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    server: Server,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(server))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(server: Server, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_on(server, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
