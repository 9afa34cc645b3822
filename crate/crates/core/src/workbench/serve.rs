use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;

use super::annotate::annotate;
use super::bundle::ModelBundle;
use crate::error::{Error, Result};
use crate::schema::SchemaDefinition;

pub const DEFAULT_MAX_BODY: usize = 1 << 20;

#[derive(Clone)]
struct Shared {
    bundle: Arc<ModelBundle>,
    schema: Arc<SchemaDefinition>,
}

#[derive(Deserialize)]
struct AnnotateRequest {
    text: String,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn health(State(s): State<Shared>) -> Response {
    Json(s.bundle.summary()).into_response()
}

/// Accepts `text/plain`, or `application/json` with a `text` field.
async fn annotate_handler(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    let json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let text = if json {
        match serde_json::from_slice::<AnnotateRequest>(&body) {
            Ok(r) => r.text,
            Err(e) => return error_response(StatusCode::BAD_REQUEST, format!("invalid request: {e}")),
        }
    } else {
        match String::from_utf8(body.to_vec()) {
            Ok(t) => t,
            Err(_) => return error_response(StatusCode::BAD_REQUEST, "body is not UTF-8"),
        }
    };
    let worker = tokio::task::spawn_blocking(move || annotate(&s.bundle, &s.schema, &text).and_then(|r| r.to_json()));
    match worker.await {
        Ok(Ok(body)) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Ok(Err(e)) => error_response(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(bundle: Arc<ModelBundle>, schema: Arc<SchemaDefinition>, max_body: usize) -> Router {
    Router::new()
        .route("/annotate", post(annotate_handler))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(Shared { bundle, schema })
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_on(listener: TcpListener, app: Router) -> Result<()> {
    axum::serve(listener, app)
        .await
        .map_err(|e| Error::Service(e.to_string()))
}

/// Binds `host:port` and serves until the process stops.
pub fn serve(bundle: ModelBundle, schema: SchemaDefinition, host: &str, port: u16, max_body: usize) -> Result<()> {
    bundle.check_schema(&schema)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Service(e.to_string()))?;
    runtime.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|e| Error::Service(format!("cannot bind {addr}: {e}")))?;
        let local: SocketAddr = listener.local_addr().map_err(|e| Error::Service(e.to_string()))?;
        log::info!("listening on http://{local}");
        serve_on(listener, router(Arc::new(bundle), Arc::new(schema), max_body)).await
    })
}
