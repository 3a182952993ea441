//! Graph-transformer inputs for one route: degree buckets for the centrality
//! embeddings, the all-pairs hop-distance table that indexes the attention
//! bias, and per-node features.
//!
//! Hop tables are the expensive part, so [`EncodingCache`] memoizes them by
//! the exact segment sequence of the route.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::graph::{GraphError, RoadNetwork, RouteGraph, SegmentId};

pub const DEFAULT_D_MAX: usize = 20;
pub const DEFAULT_DEG_MAX: usize = 8;
/// Hour of day plus a day-of-week one-hot.
pub const TIME_FEATURES: usize = 8;
/// Derived per-node columns appended after the dataset's segment features.
pub const DERIVED_NODE_FEATURES: usize = 4;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("empty graph")]
    EmptyGraph,
    #[error("d_max must be >= 1")]
    InvalidDMax,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `n x n` hop-distance buckets in `0..=d_max`, or `d_max + 1` when unreachable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpatialEncodingTable {
    n: usize,
    d_max: usize,
    phi: Vec<u16>,
}

impl SpatialEncodingTable {
    pub fn from_raw(n: usize, d_max: usize, phi: Vec<u16>) -> Self {
        assert_eq!(phi.len(), n * n);
        assert!(phi.iter().all(|&b| b as usize <= d_max + 1));
        Self { n, d_max, phi }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn unreachable(&self) -> u16 {
        self.d_max as u16 + 1
    }

    /// Number of distinct buckets, `d_max + 2`.
    pub fn bucket_count(&self) -> usize {
        self.d_max + 2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.phi[i * self.n + j] as usize
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.phi
    }

    /// Applies a node relabeling: entry `(perm[i], perm[j])` of the result
    /// equals entry `(i, j)` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut phi = vec![0u16; n * n];
        for i in 0..n {
            for j in 0..n {
                phi[perm[i] * n + perm[j]] = self.phi[i * n + j];
            }
        }
        Self {
            n,
            d_max: self.d_max,
            phi,
        }
    }
}

/// BFS from every node; distances clipped at `d_max`.
pub fn shortest_hop_distances(
    g: &RouteGraph,
    d_max: usize,
) -> Result<SpatialEncodingTable, EncodingError> {
    if d_max < 1 {
        return Err(EncodingError::InvalidDMax);
    }
    let n = g.node_count();
    if n == 0 {
        return Err(EncodingError::EmptyGraph);
    }
    let unreachable = d_max as u16 + 1;
    let mut phi = vec![unreachable; n * n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    for src in 0..n {
        dist.fill(usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &g.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let row = &mut phi[src * n..(src + 1) * n];
        for (cell, &d) in row.iter_mut().zip(&dist) {
            if d != usize::MAX {
                *cell = d.min(d_max) as u16;
            }
        }
    }
    Ok(SpatialEncodingTable { n, d_max, phi })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralityIndices {
    /// `(in_bucket, out_bucket)` per route node.
    pub buckets: Vec<(usize, usize)>,
}

/// Degree buckets per route node, taken from the parent network: a segment
/// inherits the indegree of its tail node and the outdegree of its head node.
pub fn centrality_indices(
    g: &RouteGraph,
    network: &RoadNetwork,
    deg_max: usize,
) -> CentralityIndices {
    let buckets = g
        .segment_indices
        .iter()
        .map(|&e| {
            let seg = &network.segments()[e];
            let indeg = network.degree_of(seg.from).0;
            let outdeg = network.degree_of(seg.to).1;
            (indeg.min(deg_max), outdeg.min(deg_max))
        })
        .collect();
    CentralityIndices { buckets }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    d_max: usize,
    path: Vec<SegmentId>,
}

struct CacheEntry {
    table: Arc<SpatialEncodingTable>,
    last_used: AtomicU64,
}

/// Concurrent memo of hop tables keyed by the exact segment sequence.
pub struct EncodingCache {
    entries: RwLock<HashMap<CacheKey, CacheEntry>>,
    max_entries: Option<usize>,
    enabled: bool,
    clock: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl Default for EncodingCache {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for EncodingCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncodingCache")
            .field("len", &self.len())
            .field("hits", &self.hits())
            .field("misses", &self.misses())
            .finish()
    }
}

impl EncodingCache {
    pub fn new() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            max_entries: None,
            enabled: true,
            clock: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Evicts the least recently used entry once `max_entries` is exceeded.
    pub fn with_max_entries(max_entries: usize) -> Self {
        Self {
            max_entries: Some(max_entries.max(1)),
            ..Self::new()
        }
    }

    /// A pass-through cache that always recomputes. Every call counts as a miss.
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::new()
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        path: &[SegmentId],
        g: &RouteGraph,
        d_max: usize,
    ) -> Result<Arc<SpatialEncodingTable>, EncodingError> {
        if !self.enabled {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return shortest_hop_distances(g, d_max).map(Arc::new);
        }
        let key = CacheKey {
            d_max,
            path: path.to_vec(),
        };
        let tick = self.clock.fetch_add(1, Ordering::Relaxed);
        if let Some(entry) = self.entries.read().get(&key) {
            entry.last_used.store(tick, Ordering::Relaxed);
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(entry.table.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let table = Arc::new(shortest_hop_distances(g, d_max)?);
        let mut entries = self.entries.write();
        if let Some(max) = self.max_entries {
            while entries.len() >= max && !entries.contains_key(&key) {
                let oldest = entries
                    .iter()
                    .min_by_key(|(_, e)| e.last_used.load(Ordering::Relaxed))
                    .map(|(k, _)| k.clone());
                match oldest {
                    Some(k) => entries.remove(&k),
                    None => break,
                };
            }
        }
        entries.insert(
            key,
            CacheEntry {
                table: table.clone(),
                last_used: AtomicU64::new(tick),
            },
        );
        Ok(table)
    }
}

/// Model input for one route.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRoute {
    /// Row-major `n x feature_dim`.
    pub features: Vec<f64>,
    pub feature_dim: usize,
    pub centrality: CentralityIndices,
    pub spatial: Arc<SpatialEncodingTable>,
    pub time: [f64; TIME_FEATURES],
}

impl EncodedRoute {
    pub fn n(&self) -> usize {
        self.centrality.buckets.len()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Reorders nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let f = self.feature_dim;
        let mut features = vec![0.0; n * f];
        let mut buckets = vec![(0, 0); n];
        for i in 0..n {
            features[perm[i] * f..(perm[i] + 1) * f].copy_from_slice(self.feature_row(i));
            buckets[perm[i]] = self.centrality.buckets[i];
        }
        Self {
            features,
            feature_dim: f,
            centrality: CentralityIndices { buckets },
            spatial: Arc::new(self.spatial.permuted(perm)),
            time: self.time,
        }
    }
}

/// Hour-of-day fraction followed by a Monday-first day-of-week one-hot (UTC).
pub fn time_features(depart_ts: i64) -> [f64; TIME_FEATURES] {
    let secs_of_day = depart_ts.rem_euclid(86_400);
    let days = depart_ts.div_euclid(86_400);
    // 1970-01-01 was a Thursday.
    let dow = (days + 3).rem_euclid(7) as usize;
    let mut out = [0.0; TIME_FEATURES];
    out[0] = secs_of_day as f64 / 3600.0 / 24.0;
    out[1 + dow] = 1.0;
    out
}

/// Builds [`EncodedRoute`]s for paths on one network, memoizing hop tables.
///
/// Node features are the segment's dataset features followed by its length
/// (km), its free-flow time (min), and the whole route's length (km) and
/// free-flow time (min).
#[derive(Debug)]
pub struct RouteEncoder<'a> {
    network: &'a RoadNetwork,
    cache: EncodingCache,
    pub d_max: usize,
    pub deg_max: usize,
}

impl<'a> RouteEncoder<'a> {
    pub fn new(network: &'a RoadNetwork, d_max: usize, deg_max: usize) -> Self {
        Self::with_cache(network, d_max, deg_max, EncodingCache::new())
    }

    pub fn with_cache(
        network: &'a RoadNetwork,
        d_max: usize,
        deg_max: usize,
        cache: EncodingCache,
    ) -> Self {
        Self {
            network,
            cache,
            d_max,
            deg_max,
        }
    }

    pub fn network(&self) -> &'a RoadNetwork {
        self.network
    }

    pub fn cache(&self) -> &EncodingCache {
        &self.cache
    }

    pub fn feature_dim(&self) -> usize {
        node_feature_dim(self.network)
    }

    pub fn encode(
        &self,
        path: &[SegmentId],
        depart_ts: i64,
    ) -> Result<EncodedRoute, EncodingError> {
        let g = self.network.route_subgraph(path)?;
        let spatial = self.cache.get_or_compute(path, &g, self.d_max)?;
        let centrality = centrality_indices(&g, self.network, self.deg_max);
        let segments = self.network.segments();
        let route_km: f64 = g
            .segment_indices
            .iter()
            .map(|&e| segments[e].length)
            .sum::<f64>()
            / 1000.0;
        let route_min: f64 = g
            .segment_indices
            .iter()
            .map(|&e| segments[e].base_time())
            .sum::<f64>()
            / 60.0;
        let feature_dim = self.feature_dim();
        let mut features = Vec::with_capacity(path.len() * feature_dim);
        for &e in &g.segment_indices {
            let seg = &segments[e];
            features.extend_from_slice(&seg.features);
            features.extend_from_slice(&[
                seg.length / 1000.0,
                seg.base_time() / 60.0,
                route_km,
                route_min,
            ]);
        }
        Ok(EncodedRoute {
            features,
            feature_dim,
            centrality,
            spatial,
            time: time_features(depart_ts),
        })
    }
}

pub fn node_feature_dim(network: &RoadNetwork) -> usize {
    network.feature_names().len() + DERIVED_NODE_FEATURES
}
