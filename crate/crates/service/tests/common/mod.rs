#![allow(dead_code)]

use std::path::{Path, PathBuf};

use transtte::encoding::node_feature_dim;
use transtte::graph::{Node, SegmentSpec};
use transtte::model::{self, ModelConfig, ModelParams, TrainConfig};
use transtte::poi::segment_weights;
use transtte::synthetic::{self, two_corridor};
use transtte::{RoadNetwork, RouteEncoder, Trip};
use transtte_service::{AppState, CityState, ServiceConfig};

/// A(1) -> B(2) -> C(3) on a fast road, plus a slow direct A -> C.
pub fn triangle() -> RoadNetwork {
    let nodes = vec![
        Node {
            id: 1,
            lat: 54.980,
            lon: 73.370,
        },
        Node {
            id: 2,
            lat: 54.985,
            lon: 73.380,
        },
        Node {
            id: 3,
            lat: 54.980,
            lon: 73.390,
        },
    ];
    let seg = |id, from_node, to_node, length, base_speed, class: usize| SegmentSpec {
        id,
        from_node,
        to_node,
        length,
        base_speed,
        features: (0..3).map(|c| if c == class { 1.0 } else { 0.0 }).collect(),
    };
    RoadNetwork::new(
        nodes,
        vec![
            seg(10, 1, 2, 900.0, 60.0, 0),
            seg(11, 2, 3, 900.0, 60.0, 0),
            seg(12, 1, 3, 1300.0, 20.0, 2),
        ],
        synthetic::feature_names(),
    )
    .unwrap()
}

pub fn trip(id: u64, network: &RoadNetwork, path: &[u64], scale: f64) -> Trip {
    let segs: Vec<_> = path.iter().map(|s| network.segment(*s).unwrap()).collect();
    Trip {
        trip_id: id,
        depart_ts: 1_606_800_000 + id as i64 * 600,
        path: path.to_vec(),
        travel_time: segs.iter().map(|s| s.base_time()).sum::<f64>() * scale,
        rebuild_count: 0,
        dist: segs.iter().map(|s| s.length).sum(),
    }
}

/// A toy model fitted briefly on trips over the given paths.
pub fn fitted_model(network: &RoadNetwork, paths: &[&[u64]]) -> ModelParams {
    let trips: Vec<Trip> = (0..24)
        .map(|i| {
            trip(
                i,
                network,
                paths[i as usize % paths.len()],
                1.0 + 0.02 * (i % 5) as f64,
            )
        })
        .collect();
    let cfg = ModelConfig::toy(node_feature_dim(network)).with_seed(1);
    let enc = RouteEncoder::new(network, cfg.d_max, cfg.deg_max);
    let hyper = TrainConfig {
        epochs: 5,
        batch_size: 8,
        ..Default::default()
    };
    model::train(&enc, &trips, &trips, &cfg, &hyper).unwrap().0
}

pub fn triangle_city() -> CityState {
    let net = triangle();
    let params = fitted_model(&net, &[&[10, 11], &[12], &[10]]);
    CityState::new("triangle", net, params, None, None)
}

pub fn corridor_city() -> CityState {
    let (net, pois) = two_corridor();
    let params = fitted_model(&net, &[&[1, 2], &[3, 4, 5]]);
    let cats = transtte_service::config::CategoryMap::default();
    let pic = segment_weights(&net, &pois, 100.0, &cats.picturesque).unwrap();
    let his = segment_weights(&net, &pois, 100.0, &cats.historic).unwrap();
    CityState::new("corridor", net, params, Some(pic), Some(his))
}

pub fn app_state() -> AppState {
    let mut state = AppState::default();
    state.insert(triangle_city());
    state.insert(corridor_city());
    state
}

/// Writes a grid city with trips and POIs plus a config file; returns the
/// config path. Two trips in every five get a rebuild so 40% are dropped.
pub fn write_city(dir: &Path) -> (PathBuf, Vec<Trip>) {
    let net = synthetic::grid_network(5, 5, 500.0, 3);
    let mut trips: Vec<Trip> = synthetic::random_trips(&net, 300, 0.05, 4)
        .into_iter()
        .filter(|t| t.dist >= 600.0 && t.travel_time >= 61.0)
        .take(100)
        .collect();
    assert_eq!(trips.len(), 100);
    for (i, t) in trips.iter_mut().enumerate() {
        t.trip_id = i as u64 + 1;
        t.rebuild_count = if i % 5 < 2 { 1 } else { 0 };
    }
    let city = dir.join("grid");
    synthetic::write_network(&net, &city).unwrap();
    synthetic::write_trips(&trips, &city.join("trips.csv")).unwrap();
    synthetic::write_pois(&synthetic::random_pois(&net, 80, 5), &city.join("pois.csv")).unwrap();
    let config = serde_json::json!({
        "cities": {
            "grid": {
                "nodes": "grid/nodes.csv",
                "edges": "grid/edges.csv",
                "trips": "grid/trips.csv",
                "pois": "grid/pois.csv",
                "params": "grid/model.bin"
            }
        },
        "training": { "epochs": 2, "batch_size": 8 },
        "seed": 7
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    (path, trips)
}

pub fn load_config(path: &Path) -> ServiceConfig {
    ServiceConfig::load(path).unwrap()
}
