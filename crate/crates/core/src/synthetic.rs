//! Synthetic cities, trips and POIs for tests, benchmarks and demos.

use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::graph::{FeatureSchema, Node, NodeId, RoadNetwork, SegmentSpec};
use crate::poi::{haversine, Category, Poi};
use crate::router::dijkstra_with;
use crate::trips::Trip;

/// Road classes and their free-flow speeds in km/h.
pub const ROAD_CLASSES: [(&str, f64); 3] = [
    ("primary", 60.0),
    ("secondary", 40.0),
    ("residential", 25.0),
];

pub const DEC_2020: i64 = 1_606_780_800;

const BASE_LAT: f64 = 54.98;
const BASE_LON: f64 = 73.36;

fn class_features(class: usize) -> Vec<f64> {
    let mut f = vec![0.0; ROAD_CLASSES.len()];
    f[class] = 1.0;
    f
}

pub fn feature_names() -> Vec<String> {
    ROAD_CLASSES
        .iter()
        .map(|(n, _)| format!("class_{n}"))
        .collect()
}

/// A `rows x cols` grid with two-way streets between neighbours. Every
/// fourth row and column is a primary road, every second a secondary road.
pub fn grid_network(rows: usize, cols: usize, spacing_m: f64, seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dlat = spacing_m / 111_195.0;
    let dlon = spacing_m / (111_195.0 * BASE_LAT.to_radians().cos());
    let id = |r: usize, c: usize| (r * cols + c) as NodeId + 1;
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(Node {
                id: id(r, c),
                lat: BASE_LAT + r as f64 * dlat + rng.random_range(-0.1..0.1) * dlat,
                lon: BASE_LON + c as f64 * dlon + rng.random_range(-0.1..0.1) * dlon,
            });
        }
    }
    let class_of = |line: usize| {
        if line.is_multiple_of(4) {
            0
        } else if line.is_multiple_of(2) {
            1
        } else {
            2
        }
    };
    let mut segments = Vec::new();
    let mut push = |a: NodeId, b: NodeId, class: usize, rng: &mut ChaCha8Rng| {
        let (na, nb) = (&nodes[a as usize - 1], &nodes[b as usize - 1]);
        let chord = haversine(na.lat, na.lon, nb.lat, nb.lon);
        let speed = ROAD_CLASSES[class].1 * rng.random_range(0.85..1.15);
        for (from, to) in [(a, b), (b, a)] {
            segments.push(SegmentSpec {
                id: segments.len() as u64 + 1,
                from_node: from,
                to_node: to,
                length: (chord * 1.02 * 10.0).round() / 10.0,
                base_speed: (speed * 10.0).round() / 10.0,
                features: class_features(class),
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                push(id(r, c), id(r, c + 1), class_of(r), &mut rng);
            }
            if r + 1 < rows {
                push(id(r, c), id(r + 1, c), class_of(c), &mut rng);
            }
        }
    }
    RoadNetwork::new(nodes, segments, feature_names()).expect("grid is valid")
}

/// Trips between random node pairs along perturbed shortest paths. Travel
/// time is the free-flow time scaled by `1 + noise * N(0, 1)`.
pub fn random_trips(network: &RoadNetwork, count: usize, noise: f64, seed: u64) -> Vec<Trip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("valid normal");
    let n = network.node_count();
    let mut trips = Vec::with_capacity(count);
    while trips.len() < count {
        let a = network.nodes()[rng.random_range(0..n)].id;
        let b = network.nodes()[rng.random_range(0..n)].id;
        if a == b {
            continue;
        }
        let costs: Vec<f64> = network
            .segments()
            .iter()
            .map(|s| s.base_time() * rng.random_range(0.7..1.3))
            .collect();
        let Ok(route) = dijkstra_with(network, a, b, &costs) else {
            continue;
        };
        let free_flow: f64 = route
            .path
            .iter()
            .map(|&id| network.segment(id).expect("route segment").base_time())
            .sum();
        let factor = (1.0 + noise * gauss.sample(&mut rng)).max(0.5);
        trips.push(Trip {
            trip_id: trips.len() as u64 + 1,
            depart_ts: DEC_2020 + rng.random_range(0..31 * 86_400),
            travel_time: (free_flow * factor * 10.0).round() / 10.0,
            rebuild_count: if rng.random_bool(0.1) {
                rng.random_range(1..4)
            } else {
                0
            },
            dist: route.total_length,
            path: route.path,
        });
    }
    trips
}

/// POIs scattered uniformly over the network's bounding box.
pub fn random_pois(network: &RoadNetwork, count: usize, seed: u64) -> Vec<Poi> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = network.nodes().iter().map(|n| n.lat);
    let lon = network.nodes().iter().map(|n| n.lon);
    let (lat0, lat1) = (
        lat.clone().fold(f64::MAX, f64::min),
        lat.fold(f64::MIN, f64::max),
    );
    let (lon0, lon1) = (
        lon.clone().fold(f64::MAX, f64::min),
        lon.fold(f64::MIN, f64::max),
    );
    let cats = [Category::Historic, Category::Nature, Category::Culture];
    (0..count)
        .map(|i| Poi {
            poi_id: i as u64 + 1,
            lat: rng.random_range(lat0..=lat1),
            lon: rng.random_range(lon0..=lon1),
            category: cats[rng.random_range(0..3)],
        })
        .collect()
}

/// Start node 1 and end node 2 joined by a short direct corridor through node
/// 3 and a longer corridor through nodes 4 and 5 lined with parks and
/// museums. Returns the network and the POIs along the long corridor.
pub fn two_corridor() -> (RoadNetwork, Vec<Poi>) {
    let dlat = 1.0 / 111_195.0;
    let dlon = 1.0 / (111_195.0 * BASE_LAT.to_radians().cos());
    let at = |x_m: f64, y_m: f64| (BASE_LAT + y_m * dlat, BASE_LON + x_m * dlon);
    let coords = [
        (1, at(0.0, 0.0)),
        (2, at(2000.0, 0.0)),
        (3, at(1000.0, 0.0)),
        (4, at(300.0, 800.0)),
        (5, at(1700.0, 800.0)),
    ];
    let nodes: Vec<Node> = coords
        .iter()
        .map(|&(id, (lat, lon))| Node { id, lat, lon })
        .collect();
    let seg = |id, from: NodeId, to: NodeId, class: usize| {
        let (a, b) = (&nodes[from as usize - 1], &nodes[to as usize - 1]);
        SegmentSpec {
            id,
            from_node: from,
            to_node: to,
            length: haversine(a.lat, a.lon, b.lat, b.lon).round(),
            base_speed: ROAD_CLASSES[class].1,
            features: class_features(class),
        }
    };
    let segments = vec![
        seg(1, 1, 3, 0),
        seg(2, 3, 2, 0),
        seg(3, 1, 4, 2),
        seg(4, 4, 5, 2),
        seg(5, 5, 2, 2),
    ];
    let network = RoadNetwork::new(nodes, segments, feature_names()).expect("fixture is valid");
    let mut pois = Vec::new();
    for (k, x) in [400.0, 700.0, 1000.0, 1300.0, 1600.0]
        .into_iter()
        .enumerate()
    {
        let (lat, lon) = at(x, 830.0);
        pois.push(Poi {
            poi_id: k as u64 + 1,
            lat,
            lon,
            category: if k % 2 == 0 {
                Category::Nature
            } else {
                Category::Culture
            },
        });
    }
    for (k, (x, y)) in [(150.0, 400.0), (1850.0, 400.0)].into_iter().enumerate() {
        let (lat, lon) = at(x, y);
        pois.push(Poi {
            poi_id: 6 + k as u64,
            lat,
            lon,
            category: Category::Nature,
        });
    }
    for (k, (x, y)) in [(120.0, 350.0), (1880.0, 420.0), (1000.0, 780.0)]
        .into_iter()
        .enumerate()
    {
        let (lat, lon) = at(x, y);
        pois.push(Poi {
            poi_id: 10 + k as u64,
            lat,
            lon,
            category: Category::Historic,
        });
    }
    (network, pois)
}

pub fn write_network(network: &RoadNetwork, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))?;
    w.write_record(["node_id", "lat", "lon"])?;
    for n in network.nodes() {
        w.write_record([n.id.to_string(), n.lat.to_string(), n.lon.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("edges.csv"))?;
    let mut header: Vec<String> = ["edge_id", "from_node", "to_node", "length_m", "speed_kmh"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..network.feature_names().len()).map(|k| format!("feat_{k}")));
    w.write_record(&header)?;
    for s in network.segments() {
        let mut row = vec![
            s.id.to_string(),
            s.from_node.to_string(),
            s.to_node.to_string(),
            s.length.to_string(),
            s.base_speed.to_string(),
        ];
        row.extend(s.features.iter().map(|f| f.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    let schema = FeatureSchema {
        features: network.feature_names().to_vec(),
    };
    std::fs::write(
        dir.join("schema.json"),
        serde_json::to_string_pretty(&schema)?,
    )?;
    Ok(())
}

pub fn write_trips(trips: &[Trip], path: &Path) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)?;
    w.write_record([
        "trip_id",
        "depart_ts",
        "segment_path",
        "travel_time_s",
        "rebuild_count",
        "dist_m",
    ])?;
    for t in trips {
        let path = t
            .path
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            t.trip_id.to_string(),
            t.depart_ts.to_string(),
            path,
            t.travel_time.to_string(),
            t.rebuild_count.to_string(),
            t.dist.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_pois(pois: &[Poi], path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["poi_id", "lat", "lon", "category"])?;
    for p in pois {
        let cat = match p.category {
            Category::Historic => "historic",
            Category::Nature => "nature",
            Category::Culture => "culture",
        };
        w.write_record([
            p.poi_id.to_string(),
            p.lat.to_string(),
            p.lon.to_string(),
            cat.into(),
        ])?;
    }
    w.flush()
}
