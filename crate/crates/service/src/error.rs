use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

use transtte::encoding::EncodingError;
use transtte::graph::GraphError;
use transtte::model::ModelError;
use transtte::poi::PoiError;
use transtte::router::RouteError;
use transtte::trips::TripError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("city {0:?} is not loaded")]
    CityNotLoaded(String),
    #[error("network is empty")]
    EmptyNetwork,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Trips(#[from] TripError),
    #[error(transparent)]
    Poi(#[from] PoiError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Short machine-readable error name, sent as `error` in JSON bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::CityNotLoaded(_) => "CityNotLoaded",
            ServiceError::EmptyNetwork => "EmptyNetwork",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Config(_) => "Config",
            ServiceError::Route(e) => match e {
                RouteError::UnknownNode(_) => "UnknownNode",
                RouteError::Unreachable(..) => "Unreachable",
                RouteError::InvalidCost(_) => "InvalidCost",
                RouteError::MissingSegmentWeight(_) => "MissingSegmentWeight",
                RouteError::MissingWeights(_) => "MissingWeights",
            },
            ServiceError::Model(_) => "Model",
            ServiceError::Encoding(_) => "Encoding",
            ServiceError::Graph(_) => "Graph",
            ServiceError::Trips(_) => "Trips",
            ServiceError::Poi(_) => "Poi",
            ServiceError::Io(_) => "Io",
        }
    }

    /// 400 bad input, 404 unknown entity, 409 missing dependency, 500 internal.
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::CityNotLoaded(_) => StatusCode::NOT_FOUND,
            ServiceError::Route(RouteError::UnknownNode(_))
            | ServiceError::Route(RouteError::Unreachable(..)) => StatusCode::NOT_FOUND,
            ServiceError::Route(RouteError::MissingWeights(_))
            | ServiceError::Route(RouteError::MissingSegmentWeight(_))
            | ServiceError::EmptyNetwork => StatusCode::CONFLICT,
            ServiceError::Encoding(EncodingError::Graph(
                GraphError::UnknownSegment(_) | GraphError::BrokenChain(..),
            )) => StatusCode::BAD_REQUEST,
            ServiceError::Route(RouteError::InvalidCost(_))
            | ServiceError::Model(_)
            | ServiceError::Encoding(_)
            | ServiceError::Graph(_)
            | ServiceError::Trips(_)
            | ServiceError::Poi(_)
            | ServiceError::Config(_)
            | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
