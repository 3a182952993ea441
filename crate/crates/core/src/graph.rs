//! Road network loading, validation and per-route subgraph extraction.
//!
//! External node and segment ids are arbitrary non-negative integers. They are
//! re-indexed densely on load; the original ids stay reachable through
//! [`RoadNetwork::node_index`] and [`RoadNetwork::segment_index`].

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;
pub type SegmentId = u64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("schema violation in {file}: {detail}")]
    SchemaViolation { file: String, detail: String },
    #[error("segment {segment} references unknown node {node}")]
    DanglingEndpoint { segment: SegmentId, node: NodeId },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("segments {0} and {1} are not chainable")]
    BrokenChain(SegmentId, SegmentId),
    #[error("empty path")]
    EmptyPath,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn schema(file: &Path, detail: impl Into<String>) -> GraphError {
    GraphError::SchemaViolation {
        file: file.display().to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub from_node: NodeId,
    pub to_node: NodeId,
    /// Meters, strictly positive.
    pub length: f64,
    /// Free-flow speed in km/h, strictly positive.
    pub base_speed: f64,
    pub features: Vec<f64>,
    /// Dense index of `from_node`.
    pub from: usize,
    /// Dense index of `to_node`.
    pub to: usize,
}

impl Segment {
    /// Free-flow traversal time in seconds.
    pub fn base_time(&self) -> f64 {
        self.length / (self.base_speed / 3.6)
    }
}

/// Sidecar manifest listing the per-segment feature columns of `edges.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<String>,
}

/// Directed road graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    node_index: HashMap<NodeId, usize>,
    segment_index: HashMap<SegmentId, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    feature_names: Vec<String>,
}

/// Raw segment description used to build a network in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub id: SegmentId,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub length: f64,
    pub base_speed: f64,
    pub features: Vec<f64>,
}

impl RoadNetwork {
    /// Builds and validates a network from in-memory parts.
    pub fn new(
        nodes: Vec<Node>,
        segments: Vec<SegmentSpec>,
        feature_names: Vec<String>,
    ) -> Result<Self, GraphError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node_index.insert(node.id, i).is_some() {
                return Err(GraphError::DuplicateId {
                    kind: "node",
                    id: node.id,
                });
            }
        }
        let mut segment_index = HashMap::with_capacity(segments.len());
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut built = Vec::with_capacity(segments.len());
        for spec in segments {
            let from = *node_index
                .get(&spec.from_node)
                .ok_or(GraphError::DanglingEndpoint {
                    segment: spec.id,
                    node: spec.from_node,
                })?;
            let to = *node_index
                .get(&spec.to_node)
                .ok_or(GraphError::DanglingEndpoint {
                    segment: spec.id,
                    node: spec.to_node,
                })?;
            let invalid = |detail: String| GraphError::SchemaViolation {
                file: "<segments>".into(),
                detail,
            };
            if !(spec.length > 0.0 && spec.length.is_finite()) {
                return Err(invalid(format!("segment {} length must be > 0", spec.id)));
            }
            if !(spec.base_speed > 0.0 && spec.base_speed.is_finite()) {
                return Err(invalid(format!("segment {} speed must be > 0", spec.id)));
            }
            if spec.features.len() != feature_names.len() {
                return Err(invalid(format!(
                    "segment {} has {} features, expected {}",
                    spec.id,
                    spec.features.len(),
                    feature_names.len()
                )));
            }
            let idx = built.len();
            if segment_index.insert(spec.id, idx).is_some() {
                return Err(GraphError::DuplicateId {
                    kind: "segment",
                    id: spec.id,
                });
            }
            outgoing[from].push(idx);
            incoming[to].push(idx);
            built.push(Segment {
                id: spec.id,
                from_node: spec.from_node,
                to_node: spec.to_node,
                length: spec.length,
                base_speed: spec.base_speed,
                features: spec.features,
                from,
                to,
            });
        }
        Ok(Self {
            nodes,
            segments: built,
            node_index,
            segment_index,
            outgoing,
            incoming,
            feature_names,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn segment_index(&self, id: SegmentId) -> Option<usize> {
        self.segment_index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segment_index(id).map(|i| &self.segments[i])
    }

    /// Dense indices of the segments leaving the node at dense index `node`.
    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    /// `(indegree, outdegree)` per node, in dense node order.
    pub fn degrees(&self) -> Vec<(usize, usize)> {
        self.incoming
            .iter()
            .zip(&self.outgoing)
            .map(|(i, o)| (i.len(), o.len()))
            .collect()
    }

    pub fn degree_of(&self, node: usize) -> (usize, usize) {
        (self.incoming[node].len(), self.outgoing[node].len())
    }

    /// Builds the segments-as-nodes graph of a chainable path. Consecutive
    /// segments are linked in both directions.
    pub fn route_subgraph(&self, path: &[SegmentId]) -> Result<RouteGraph, GraphError> {
        if path.is_empty() {
            return Err(GraphError::EmptyPath);
        }
        let mut indices = Vec::with_capacity(path.len());
        for &id in path {
            indices.push(
                self.segment_index(id)
                    .ok_or(GraphError::UnknownSegment(id))?,
            );
        }
        for (w, pair) in indices.windows(2).enumerate() {
            if self.segments[pair[0]].to != self.segments[pair[1]].from {
                return Err(GraphError::BrokenChain(path[w], path[w + 1]));
            }
        }
        let n = path.len();
        let adjacency = (0..n)
            .map(|i| {
                let mut adj = Vec::with_capacity(2);
                if i > 0 {
                    adj.push(i - 1);
                }
                if i + 1 < n {
                    adj.push(i + 1);
                }
                adj
            })
            .collect();
        Ok(RouteGraph {
            segments: path.to_vec(),
            segment_indices: indices,
            adjacency,
        })
    }

    /// Loads `nodes.csv` and `edges.csv`. Feature columns are checked against a
    /// `schema.json` next to the edges file when one exists; otherwise they are
    /// taken from the `feat_*` header columns.
    pub fn load(nodes_path: &Path, edges_path: &Path) -> Result<Self, GraphError> {
        let nodes = read_nodes(nodes_path)?;
        let schema_path = edges_path
            .parent()
            .map(|p| p.join("schema.json"))
            .unwrap_or_else(|| PathBuf::from("schema.json"));
        let declared = if schema_path.exists() {
            let text = std::fs::read_to_string(&schema_path)?;
            let schema: FeatureSchema = serde_json::from_str(&text)
                .map_err(|e| self::schema(&schema_path, e.to_string()))?;
            Some(schema.features)
        } else {
            None
        };
        let (segments, names) = read_edges(edges_path, declared)?;
        Self::new(nodes, segments, names).map_err(|e| match e {
            GraphError::SchemaViolation { detail, .. } => schema(edges_path, detail),
            other => other,
        })
    }
}

/// Convenience wrapper over [`RoadNetwork::load`].
pub fn load_network(nodes_path: &Path, edges_path: &Path) -> Result<RoadNetwork, GraphError> {
    RoadNetwork::load(nodes_path, edges_path)
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>, GraphError> {
    if !path.exists() {
        return Err(GraphError::MissingFile(path.to_path_buf()));
    }
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| schema(path, e.to_string()))
}

fn field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, GraphError> {
    let raw = record
        .get(idx)
        .ok_or_else(|| schema(path, format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| schema(path, format!("bad {name} value {raw:?}")))
}

fn read_nodes(path: &Path) -> Result<Vec<Node>, GraphError> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| schema(path, e.to_string()))?;
    let expected = ["node_id", "lat", "lon"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema(
            path,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let mut nodes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| schema(path, e.to_string()))?;
        if record.len() != 3 {
            return Err(schema(
                path,
                format!("expected 3 columns, got {}", record.len()),
            ));
        }
        let node = Node {
            id: field(path, &record, 0, "node_id")?,
            lat: field(path, &record, 1, "lat")?,
            lon: field(path, &record, 2, "lon")?,
        };
        if !(-90.0..=90.0).contains(&node.lat) || !(-180.0..=180.0).contains(&node.lon) {
            return Err(schema(
                path,
                format!("node {} coordinates out of range", node.id),
            ));
        }
        nodes.push(node);
    }
    Ok(nodes)
}

const EDGE_FIXED: [&str; 5] = ["edge_id", "from_node", "to_node", "length_m", "speed_kmh"];

fn read_edges(
    path: &Path,
    declared: Option<Vec<String>>,
) -> Result<(Vec<SegmentSpec>, Vec<String>), GraphError> {
    let mut reader = open_csv(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| schema(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.len() < EDGE_FIXED.len() || headers[..EDGE_FIXED.len()] != EDGE_FIXED {
        return Err(schema(
            path,
            format!("header must start with {}", EDGE_FIXED.join(",")),
        ));
    }
    let feature_cols = &headers[EDGE_FIXED.len()..];
    for (k, name) in feature_cols.iter().enumerate() {
        if *name != format!("feat_{k}") {
            return Err(schema(
                path,
                format!("feature column {k} must be named feat_{k}"),
            ));
        }
    }
    let names = match declared {
        Some(names) => {
            if names.len() != feature_cols.len() {
                return Err(schema(
                    path,
                    format!(
                        "schema.json declares {} features, header has {}",
                        names.len(),
                        feature_cols.len()
                    ),
                ));
            }
            names
        }
        None => feature_cols.to_vec(),
    };
    let width = headers.len();
    let mut segments = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| schema(path, e.to_string()))?;
        if record.len() != width {
            return Err(schema(
                path,
                format!("expected {width} columns, got {}", record.len()),
            ));
        }
        let features = (EDGE_FIXED.len()..width)
            .map(|i| field(path, &record, i, &headers[i]))
            .collect::<Result<Vec<f64>, _>>()?;
        segments.push(SegmentSpec {
            id: field(path, &record, 0, "edge_id")?,
            from_node: field(path, &record, 1, "from_node")?,
            to_node: field(path, &record, 2, "to_node")?,
            length: field(path, &record, 3, "length_m")?,
            base_speed: field(path, &record, 4, "speed_kmh")?,
            features,
        });
    }
    Ok((segments, names))
}

/// Graph whose nodes are the segments of one route, in travel order.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteGraph {
    /// External segment ids in route order.
    pub segments: Vec<SegmentId>,
    /// Dense indices of those segments in the parent network. Empty for graphs
    /// built with [`RouteGraph::from_adjacency`].
    pub segment_indices: Vec<usize>,
    pub adjacency: Vec<Vec<usize>>,
}

impl RouteGraph {
    /// A free-standing local graph with no parent network.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        Self {
            segments: (0..adjacency.len() as u64).collect(),
            segment_indices: Vec::new(),
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }
}
