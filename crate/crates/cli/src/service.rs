//! Local HTTP service over one immutable model.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mideu::Model;
use serde::Serialize;
use tokio::net::TcpListener;

use crate::api::{self, ApiError, ApiResult};

type Shared = Arc<Model>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn reply<T: Serialize>(r: ApiResult<T>) -> Response {
    match r {
        Ok(body) => Json(body).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Runs a pure handler off the async workers.
async fn blocking<Q, T>(model: Shared, body: Result<Json<Q>, JsonRejection>, f: fn(&Model, &Q) -> ApiResult<T>) -> Response
where
    Q: Send + 'static,
    T: Serialize + Send + 'static,
{
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return ApiError::bad_request(e.body_text()).into_response(),
    };
    match tokio::task::spawn_blocking(move || f(&model, &req)).await {
        Ok(r) => reply(r),
        Err(e) => ApiError { status: 500, error: e.to_string(), diagnostics: Vec::new() }.into_response(),
    }
}

async fn get_model(State(m): State<Shared>) -> Response {
    Json(api::model_response(&m)).into_response()
}

async fn evaluate(State(m): State<Shared>, body: Result<Json<api::EvaluateRequest>, JsonRejection>) -> Response {
    blocking(m, body, api::evaluate).await
}

async fn sweep(State(m): State<Shared>, body: Result<Json<api::SweepRequest>, JsonRejection>) -> Response {
    blocking(m, body, api::sweep).await
}

async fn policy_table(State(m): State<Shared>, body: Result<Json<api::PolicyTableRequest>, JsonRejection>) -> Response {
    blocking(m, body, api::policy_table).await
}

pub fn router(model: Model) -> Router {
    Router::new()
        .route("/model", get(get_model))
        .route("/evaluate", post(evaluate))
        .route("/sweep", post(sweep))
        .route("/policy-table", post(policy_table))
        .with_state(Arc::new(model))
}

/// Serves until the listener fails.
pub async fn serve(model: Model, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(model)).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}
