//! JSON-over-HTTP binding of the session store.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::session::Event;
use crate::store::{CreateRequest, SessionStore};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self.kind(), "message": self.to_string() }))).into_response()
    }
}

type Reply<T> = Result<Json<T>, ServiceError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionBody {
    action: usize,
}

#[derive(Debug, Serialize)]
struct LogDocument {
    session_id: String,
    events: Vec<Event>,
}

/// Parses a JSON body, mapping every failure to 400. An empty body reads as `{}`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ServiceError::InvalidRequest(e.to_string()))
}

async fn create(State(store): State<Arc<SessionStore>>, body: Bytes) -> Reply<crate::store::Created> {
    let req: CreateRequest = parse(&body)?;
    Ok(Json(store.create(req)?))
}

async fn item(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Reply<crate::session::ItemView> {
    Ok(Json(store.with_session(&id, |s| Ok(s.item_view()))?))
}

async fn intended(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<crate::session::SupportReveal> {
    let b: ActionBody = parse(&body)?;
    Ok(Json(store.with_session(&id, |s| s.submit_intended(b.action, crate::store::now_ms()))?))
}

async fn explanation(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Reply<crate::session::ExplanationReply> {
    Ok(Json(store.with_session(&id, |s| s.request_explanation(crate::store::now_ms()))?))
}

async fn final_action(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<crate::session::FinalReply> {
    let b: ActionBody = parse(&body)?;
    Ok(Json(store.with_session(&id, |s| s.submit_final(b.action, crate::store::now_ms()))?))
}

async fn log(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Reply<LogDocument> {
    let events = store.export_log(&id)?;
    Ok(Json(LogDocument { session_id: id, events }))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/item", get(item))
        .route("/sessions/{id}/intended", post(intended))
        .route("/sessions/{id}/explanation", post(explanation))
        .route("/sessions/{id}/final", post(final_action))
        .route("/sessions/{id}/log", get(log));
    for (bundle_id, root) in store.asset_roots() {
        app = app.nest_service(&format!("/assets/{bundle_id}"), ServeDir::new(root));
    }
    app.with_state(store)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
