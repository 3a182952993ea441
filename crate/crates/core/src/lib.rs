//! Travel time estimation over a road network with a graph transformer, and
//! Dijkstra routing with free-flow or POI-based segment costs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod encoding;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod poi;
pub mod router;
pub mod synthetic;
pub mod trips;

pub use encoding::{EncodedRoute, EncodingCache, RouteEncoder, SpatialEncodingTable};
pub use graph::{load_network, NodeId, RoadNetwork, RouteGraph, Segment, SegmentId};
pub use model::{ModelConfig, ModelParams, TrainConfig};
pub use poi::{Category, Poi, SegmentWeights};
pub use router::{Route, RouteKind};
pub use trips::{FilterConfig, Trip};
