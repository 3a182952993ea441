//! Command line and HTTP front end: dataset ingestion, training, evaluation
//! and route queries that attach a model ETA to the chosen path.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod state;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use state::{snap_to_node, AppState, CityState, Endpoint, RouteRequest, RouteResponse};
