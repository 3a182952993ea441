//! Dijkstra over the directed road network with pluggable segment costs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, RoadNetwork, Segment, SegmentId};
use crate::poi::SegmentWeights;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {1} is unreachable from node {0}")]
    Unreachable(NodeId, NodeId),
    #[error("segment {0} has a non-positive or non-finite cost")]
    InvalidCost(SegmentId),
    #[error("segment {0} has no POI weight")]
    MissingSegmentWeight(SegmentId),
    #[error("route kind {0:?} needs POI weights, none loaded")]
    MissingWeights(RouteKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteKind {
    Fastest,
    Picturesque,
    Historic,
}

impl std::str::FromStr for RouteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fastest" => Ok(RouteKind::Fastest),
            "picturesque" => Ok(RouteKind::Picturesque),
            "historic" => Ok(RouteKind::Historic),
            other => Err(format!("unknown route kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CostFunction<'a> {
    /// Free-flow seconds, `length / base_speed`.
    BaseTime,
    /// The segment's POI weight.
    PoiWeight(&'a SegmentWeights),
    /// `c * base_time`; used to check argmin invariance under scaling.
    ScaledBaseTime(f64),
}

impl CostFunction<'_> {
    pub fn cost(&self, segment: &Segment) -> Result<f64, RouteError> {
        let c = match self {
            CostFunction::BaseTime => segment.base_time(),
            CostFunction::ScaledBaseTime(k) => k * segment.base_time(),
            CostFunction::PoiWeight(w) => w
                .weight(segment.id)
                .ok_or(RouteError::MissingSegmentWeight(segment.id))?,
        };
        if c > 0.0 && c.is_finite() {
            Ok(c)
        } else {
            Err(RouteError::InvalidCost(segment.id))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub path: Vec<SegmentId>,
    pub total_cost: f64,
    pub total_length: f64,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    cost: f64,
    node_id: NodeId,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed for a min-heap; equal costs pop the smaller node id first.
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node_id.cmp(&self.node_id))
    }
}

/// Minimum-cost directed path using per-segment costs from `cost_of`
/// (indexed by dense segment index). Costs must be positive and finite.
pub fn dijkstra_with(
    network: &RoadNetwork,
    origin: NodeId,
    destination: NodeId,
    cost_of: &[f64],
) -> Result<Route, RouteError> {
    let src = network
        .node_index(origin)
        .ok_or(RouteError::UnknownNode(origin))?;
    let dst = network
        .node_index(destination)
        .ok_or(RouteError::UnknownNode(destination))?;
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Frontier {
        cost: 0.0,
        node_id: origin,
        node: src,
    });
    while let Some(Frontier { cost, node, .. }) = heap.pop() {
        if settled[node] || cost > dist[node] {
            continue;
        }
        settled[node] = true;
        if node == dst {
            break;
        }
        for &e in network.outgoing(node) {
            let seg = &network.segments()[e];
            let next = cost + cost_of[e];
            if next < dist[seg.to] {
                dist[seg.to] = next;
                parent[seg.to] = Some(e);
                heap.push(Frontier {
                    cost: next,
                    node_id: seg.to_node,
                    node: seg.to,
                });
            }
        }
    }
    if !dist[dst].is_finite() {
        return Err(RouteError::Unreachable(origin, destination));
    }
    let mut rev = Vec::new();
    let mut at = dst;
    while let Some(e) = parent[at] {
        rev.push(e);
        at = network.segments()[e].from;
    }
    rev.reverse();
    let segments = network.segments();
    Ok(Route {
        path: rev.iter().map(|&e| segments[e].id).collect(),
        total_cost: dist[dst],
        total_length: rev.iter().map(|&e| segments[e].length).sum(),
        eta: None,
    })
}

/// Per-segment costs in dense segment order.
pub fn segment_costs(network: &RoadNetwork, cost: &CostFunction) -> Result<Vec<f64>, RouteError> {
    network.segments().iter().map(|s| cost.cost(s)).collect()
}

pub fn dijkstra(
    network: &RoadNetwork,
    origin: NodeId,
    destination: NodeId,
    cost: &CostFunction,
) -> Result<Route, RouteError> {
    let costs = segment_costs(network, cost)?;
    dijkstra_with(network, origin, destination, &costs)
}

/// Fastest routes use free-flow time; themed routes use the POI weights
/// built for their category set.
pub fn route_by_type(
    network: &RoadNetwork,
    origin: NodeId,
    destination: NodeId,
    kind: RouteKind,
    weights: Option<&SegmentWeights>,
) -> Result<Route, RouteError> {
    let cost = match kind {
        RouteKind::Fastest => CostFunction::BaseTime,
        RouteKind::Picturesque | RouteKind::Historic => {
            CostFunction::PoiWeight(weights.ok_or(RouteError::MissingWeights(kind))?)
        }
    };
    dijkstra(network, origin, destination, &cost)
}
