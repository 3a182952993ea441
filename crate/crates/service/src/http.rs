//! JSON over HTTP: `POST /v1/route`, `GET /v1/cities`, `GET /v1/health`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::state::{AppState, CityInfo, RouteRequest, RouteResponse};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/route", post(route))
        .route("/v1/cities", get(cities))
        .route("/v1/health", get(health))
        .with_state(Arc::new(state))
}

async fn route(
    State(state): State<Arc<AppState>>,
    body: Result<Json<RouteRequest>, JsonRejection>,
) -> Result<Json<RouteResponse>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    state.handle_route(&req).map(Json)
}

async fn cities(State(state): State<Arc<AppState>>) -> Json<Vec<CityInfo>> {
    Json(state.city_infos())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "status": "ok", "cities": state.cities.len() }))
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
