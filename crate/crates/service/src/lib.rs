//! HTTP/JSON front end for the detector.
//!
//! | method | path                  | body                | response          |
//! |--------|-----------------------|---------------------|-------------------|
//! | GET    | `/health`             |                     | `Health`          |
//! | POST   | `/v1/profile`         | `ProfileRequest`    | `ProfileResponse` |
//! | POST   | `/v1/stats`           | `StatsRequest`      | `StatsResponse`   |
//! | POST   | `/v1/diff`            | `DiffRequest`       | `DiffResponse`    |
//! | POST   | `/v1/run`             | `RunRequest`        | `RunResponse`     |
//! | POST   | `/v1/inject`          | `InjectRequest`     | `Scenario`        |
//! | POST   | `/v1/envelope/decode` | `DecodeRequest`     | `Envelope`        |
//!
//! Types live in [`cisguard_core::api`]. Failures return an `ErrorBody` with
//! status 400 for unreadable requests and 422 for requests that parse but
//! cannot be processed.

use std::future::Future;
use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::DefaultBodyLimit;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cisguard_core::api::{self, ApiError, ErrorBody, Health};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// Request bodies may carry whole listings inline.
pub const BODY_LIMIT: usize = 64 * 1024 * 1024;

/// Error response: a status and an [`ErrorBody`].
#[derive(Debug)]
pub struct Failure(StatusCode, ErrorBody);

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(StatusCode::UNPROCESSABLE_ENTITY, ErrorBody::from(&e))
    }
}

impl From<JsonRejection> for Failure {
    fn from(e: JsonRejection) -> Self {
        Failure(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                kind: "request".into(),
                error: e.body_text(),
            },
        )
    }
}

/// Runs a CPU-bound operation off the async workers.
async fn blocking<Req, Resp>(
    body: Result<Json<Req>, JsonRejection>,
    op: fn(&Req) -> Result<Resp, ApiError>,
) -> Result<Json<Resp>, Failure>
where
    Req: Send + 'static,
    Resp: Send + 'static,
{
    let Json(req) = body?;
    let out = tokio::task::spawn_blocking(move || op(&req))
        .await
        .map_err(|e| {
            Failure(
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    kind: "internal".into(),
                    error: e.to_string(),
                },
            )
        })??;
    Ok(Json(out))
}

async fn health() -> Json<Health> {
    Json(Health::ok())
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/profile", post(|b| blocking(b, api::profile)))
        .route("/v1/stats", post(|b| blocking(b, api::stats)))
        .route("/v1/diff", post(|b| blocking(b, api::diff)))
        .route("/v1/run", post(|b| blocking(b, api::run)))
        .route("/v1/inject", post(|b| blocking(b, api::inject)))
        .route("/v1/envelope/decode", post(|b| blocking(b, api::decode)))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves in the background. Returns the bound address,
/// useful with port 0.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(serve(listener, std::future::pending()));
    Ok((local, handle))
}

/// Resolves on Ctrl-C.
pub async fn ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
}
