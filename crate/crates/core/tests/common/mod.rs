//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transtte::encoding::{CentralityIndices, SpatialEncodingTable};
use transtte::graph::{Node, SegmentSpec};
use transtte::model::LayerWeights;
use transtte::{EncodedRoute, FilterConfig, RoadNetwork, Trip};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All-pairs hop distances by Floyd–Warshall, clipped like the encoder.
pub fn floyd_warshall(adjacency: &[Vec<usize>], d_max: usize) -> Vec<u16> {
    let n = adjacency.len();
    let inf = u64::MAX / 4;
    let mut d = vec![inf; n * n];
    for i in 0..n {
        d[i * n + i] = 0;
        for &j in &adjacency[i] {
            if i != j {
                d[i * n + j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d.iter()
        .map(|&x| {
            if x >= inf {
                d_max as u16 + 1
            } else {
                x.min(d_max as u64) as u16
            }
        })
        .collect()
}

/// Random directed adjacency lists; `p` is the edge probability.
pub fn random_adjacency(rng: &mut impl Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i && rng.random_bool(p)).collect())
        .collect()
}

/// Random network on nodes `1..=n` with integer segment costs in `1..=9`,
/// returned as dense per-segment costs.
pub fn random_network(rng: &mut impl Rng, n: usize, p: f64) -> (RoadNetwork, Vec<f64>) {
    let nodes = (1..=n as u64)
        .map(|id| Node {
            id,
            lat: 55.0 + id as f64 * 1e-3,
            lon: 73.0,
        })
        .collect();
    let mut specs = Vec::new();
    let mut costs = Vec::new();
    for a in 1..=n as u64 {
        for b in 1..=n as u64 {
            if a != b && rng.random_bool(p) {
                specs.push(SegmentSpec {
                    id: specs.len() as u64 + 100,
                    from_node: a,
                    to_node: b,
                    length: 100.0,
                    base_speed: 36.0,
                    features: vec![],
                });
                costs.push(rng.random_range(1..=9) as f64);
            }
        }
    }
    (RoadNetwork::new(nodes, specs, vec![]).unwrap(), costs)
}

/// Every simple directed path from `origin` to `destination` as
/// `(cost, segment ids)`, by depth-first enumeration.
pub fn simple_paths(
    network: &RoadNetwork,
    costs: &[f64],
    origin: u64,
    destination: u64,
) -> Vec<(f64, Vec<u64>)> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        net: &RoadNetwork,
        costs: &[f64],
        at: u64,
        dst: u64,
        visited: &mut Vec<u64>,
        path: &mut Vec<u64>,
        cost: f64,
        out: &mut Vec<(f64, Vec<u64>)>,
    ) {
        if at == dst {
            out.push((cost, path.clone()));
            return;
        }
        for (e, seg) in net.segments().iter().enumerate() {
            if seg.from_node == at && !visited.contains(&seg.to_node) {
                visited.push(seg.to_node);
                path.push(seg.id);
                go(
                    net,
                    costs,
                    seg.to_node,
                    dst,
                    visited,
                    path,
                    cost + costs[e],
                    out,
                );
                path.pop();
                visited.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(
        network,
        costs,
        origin,
        destination,
        &mut vec![origin],
        &mut Vec::new(),
        0.0,
        &mut out,
    );
    out
}

/// Scaled dot-product attention written as plain loops, optionally with a
/// per-head additive bias `bias[h][i][j]`.
pub fn naive_attention(
    layer: &LayerWeights,
    heads: usize,
    x: &[f64],
    n: usize,
    bias: Option<&dyn Fn(usize, usize, usize) -> f64>,
) -> Vec<f64> {
    let d = x.len() / n;
    let dh = d / heads;
    let proj = |w: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..d)
                    .map(|c| (0..d).map(|k| x[i * d + k] * w[k * d + c]).sum())
                    .collect()
            })
            .collect()
    };
    let (q, k, v) = (proj(&layer.wq), proj(&layer.wk), proj(&layer.wv));
    let mut concat = vec![vec![0.0; d]; n];
    for h in 0..heads {
        for i in 0..n {
            let mut scores: Vec<f64> = (0..n)
                .map(|j| {
                    let s: f64 = (h * dh..(h + 1) * dh).map(|c| q[i][c] * k[j][c]).sum();
                    s / (dh as f64).sqrt() + bias.map_or(0.0, |b| b(h, i, j))
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            for s in &mut scores {
                *s = (*s - m).exp() / z;
            }
            for c in h * dh..(h + 1) * dh {
                concat[i][c] = (0..n).map(|j| scores[j] * v[j][c]).sum();
            }
        }
    }
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        for c in 0..d {
            out[i * d + c] = (0..d).map(|k| concat[i][k] * layer.wo[k * d + c]).sum();
        }
    }
    out
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One-pass predicate scan, written against the filter's documented rule.
pub fn filter_oracle(trips: &[Trip], cfg: &FilterConfig) -> Vec<Trip> {
    let mut out = Vec::new();
    for t in trips {
        let rebuild_ok = t.rebuild_count <= cfg.max_rebuild_count;
        let dist_ok = t.dist >= cfg.min_length && t.dist <= cfg.max_length;
        let time_ok = t.travel_time >= cfg.min_time && t.travel_time <= cfg.max_time;
        if rebuild_ok && dist_ok && time_ok {
            out.push(t.clone());
        }
    }
    out
}

/// Trips with random attributes straddling the default filter bounds.
pub fn random_trip_attrs(rng: &mut impl Rng, count: usize) -> Vec<Trip> {
    (0..count)
        .map(|i| Trip {
            trip_id: i as u64,
            depart_ts: 1_606_780_800 + rng.random_range(0..86_400 * 31),
            path: vec![1],
            travel_time: rng.random_range(1.0..9000.0),
            rebuild_count: rng.random_range(0..3),
            dist: rng.random_range(100.0..60_000.0),
        })
        .collect()
}

/// A synthetic encoded path route of `n` nodes with `f` features.
pub fn random_route(
    rng: &mut impl Rng,
    n: usize,
    f: usize,
    d_max: usize,
    deg_max: usize,
) -> EncodedRoute {
    let phi = (0..n * n)
        .map(|k| (((k / n) as i64 - (k % n) as i64).unsigned_abs() as usize).min(d_max) as u16)
        .collect();
    let mut time = [0.0; 8];
    time[0] = rng.random_range(0.0..1.0);
    time[1 + rng.random_range(0..7)] = 1.0;
    EncodedRoute {
        features: (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
        feature_dim: f,
        centrality: CentralityIndices {
            buckets: (0..n)
                .map(|_| (rng.random_range(0..=deg_max), rng.random_range(0..=deg_max)))
                .collect(),
        },
        spatial: Arc::new(SpatialEncodingTable::from_raw(n, d_max, phi)),
        time,
    }
}
