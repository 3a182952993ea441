//! Points of interest and the themed per-segment weights `w = 1 / (1 + c_r)`,
//! where `c_r` counts POIs within `r` meters of a segment.
//!
//! Segment geometry is the straight chord between its endpoints. Distances are
//! measured in a local equirectangular projection centered at the segment
//! midpoint.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{RoadNetwork, Segment, SegmentId};

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
pub const DEFAULT_RADIUS_M: f64 = 100.0;

#[derive(Debug, Error)]
pub enum PoiError {
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("poi {id}: coordinate ({lat}, {lon}) out of range")]
    CoordinateOutOfRange { id: u64, lat: f64, lon: f64 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("radius must be > 0, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Historic,
    Nature,
    Culture,
}

impl std::str::FromStr for Category {
    type Err = PoiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "historic" => Ok(Category::Historic),
            "nature" => Ok(Category::Nature),
            "culture" => Ok(Category::Culture),
            other => Err(PoiError::UnknownCategory(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub poi_id: u64,
    pub lat: f64,
    pub lon: f64,
    pub category: Category,
}

pub fn load_pois(path: &Path) -> Result<Vec<Poi>, PoiError> {
    if !path.exists() {
        return Err(PoiError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| PoiError::SchemaViolation(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| PoiError::SchemaViolation(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["poi_id", "lat", "lon", "category"] {
        return Err(PoiError::SchemaViolation(
            "expected header poi_id,lat,lon,category".into(),
        ));
    }
    let mut pois = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PoiError::SchemaViolation(e.to_string()))?;
        if record.len() != 4 {
            return Err(PoiError::SchemaViolation(format!(
                "expected 4 columns, got {}",
                record.len()
            )));
        }
        let num = |i: usize| -> Result<f64, PoiError> {
            record[i]
                .parse()
                .map_err(|_| PoiError::SchemaViolation(format!("bad number {:?}", &record[i])))
        };
        let poi_id: u64 = record[0]
            .parse()
            .map_err(|_| PoiError::SchemaViolation(format!("bad poi_id {:?}", &record[0])))?;
        let (lat, lon) = (num(1)?, num(2)?);
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(PoiError::CoordinateOutOfRange {
                id: poi_id,
                lat,
                lon,
            });
        }
        pois.push(Poi {
            poi_id,
            lat,
            lon,
            category: record[3].parse()?,
        });
    }
    Ok(pois)
}

/// Great-circle distance in meters.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

/// Distance in meters from a point to the chord `(lat_a, lon_a)-(lat_b, lon_b)`.
pub fn point_to_chord_distance(
    lat: f64,
    lon: f64,
    (lat_a, lon_a): (f64, f64),
    (lat_b, lon_b): (f64, f64),
) -> f64 {
    let lat0 = 0.5 * (lat_a + lat_b);
    let lon0 = 0.5 * (lon_a + lon_b);
    let kx = EARTH_RADIUS_M * lat0.to_radians().cos() * std::f64::consts::PI / 180.0;
    let ky = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let project = |la: f64, lo: f64| ((lo - lon0) * kx, (la - lat0) * ky);
    let (ax, ay) = project(lat_a, lon_a);
    let (bx, by) = project(lat_b, lon_b);
    let (px, py) = project(lat, lon);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn endpoints(segment: &Segment, network: &RoadNetwork) -> ((f64, f64), (f64, f64)) {
    let a = &network.nodes()[segment.from];
    let b = &network.nodes()[segment.to];
    ((a.lat, a.lon), (b.lat, b.lon))
}

/// Number of POIs within `r` meters of the segment chord.
pub fn count_within_radius(
    segment: &Segment,
    pois: &[Poi],
    r: f64,
    network: &RoadNetwork,
) -> Result<u32, PoiError> {
    if !(r > 0.0) {
        return Err(PoiError::NonPositiveRadius(r));
    }
    let (a, b) = endpoints(segment, network);
    Ok(pois
        .iter()
        .filter(|p| point_to_chord_distance(p.lat, p.lon, a, b) <= r)
        .count() as u32)
}

/// `1 / (1 + c_r)`.
pub fn poi_weight(count: u32) -> f64 {
    1.0 / (1.0 + count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentWeight {
    pub count: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentWeights {
    weights: HashMap<SegmentId, SegmentWeight>,
}

impl SegmentWeights {
    pub fn from_counts(counts: impl IntoIterator<Item = (SegmentId, u32)>) -> Self {
        Self {
            weights: counts
                .into_iter()
                .map(|(id, count)| {
                    (
                        id,
                        SegmentWeight {
                            count,
                            weight: poi_weight(count),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, id: SegmentId) -> Option<SegmentWeight> {
        self.weights.get(&id).copied()
    }

    pub fn weight(&self, id: SegmentId) -> Option<f64> {
        self.weights.get(&id).map(|w| w.weight)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Uniform lat/lon bucket grid over POIs with cells roughly `r` meters wide.
struct PoiGrid<'a> {
    pois: &'a [Poi],
    cell_lat: f64,
    cell_lon: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> PoiGrid<'a> {
    fn new(pois: &'a [Poi], r: f64, ref_lat: f64) -> Self {
        let m_per_deg = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let cell_lat = r / m_per_deg;
        let cell_lon = r / (m_per_deg * ref_lat.to_radians().cos().max(0.01));
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in pois.iter().enumerate() {
            let key = (
                (p.lat / cell_lat).floor() as i64,
                (p.lon / cell_lon).floor() as i64,
            );
            buckets.entry(key).or_default().push(i);
        }
        Self {
            pois,
            cell_lat,
            cell_lon,
            buckets,
        }
    }

    /// POI indices in cells overlapping the bounding box, padded by two cells.
    fn candidates(&self, (lat_a, lon_a): (f64, f64), (lat_b, lon_b): (f64, f64)) -> Vec<usize> {
        let i0 = (lat_a.min(lat_b) / self.cell_lat).floor() as i64 - 2;
        let i1 = (lat_a.max(lat_b) / self.cell_lat).floor() as i64 + 2;
        let j0 = (lon_a.min(lon_b) / self.cell_lon).floor() as i64 - 2;
        let j1 = (lon_a.max(lon_b) / self.cell_lon).floor() as i64 + 2;
        let cells = ((i1 - i0 + 1) * (j1 - j0 + 1)) as usize;
        if cells > self.buckets.len() {
            return (0..self.pois.len()).collect();
        }
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(b) = self.buckets.get(&(i, j)) {
                    out.extend_from_slice(b);
                }
            }
        }
        out
    }
}

/// Per-segment POI counts and weights, counting only POIs in `categories`.
pub fn segment_weights(
    network: &RoadNetwork,
    pois: &[Poi],
    r: f64,
    categories: &BTreeSet<Category>,
) -> Result<SegmentWeights, PoiError> {
    if !(r > 0.0) {
        return Err(PoiError::NonPositiveRadius(r));
    }
    let selected: Vec<Poi> = pois
        .iter()
        .filter(|p| categories.contains(&p.category))
        .cloned()
        .collect();
    let ref_lat = if network.nodes().is_empty() {
        0.0
    } else {
        network.nodes().iter().map(|n| n.lat).sum::<f64>() / network.node_count() as f64
    };
    let grid = PoiGrid::new(&selected, r, ref_lat);
    let counts = network.segments().iter().map(|seg| {
        let (a, b) = endpoints(seg, network);
        let count = grid
            .candidates(a, b)
            .into_iter()
            .filter(|&i| point_to_chord_distance(selected[i].lat, selected[i].lon, a, b) <= r)
            .count() as u32;
        (seg.id, count)
    });
    Ok(SegmentWeights::from_counts(counts))
}
