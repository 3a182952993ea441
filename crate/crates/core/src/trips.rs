//! Historical trips: loading, noise filtering and train/test splitting.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{RoadNetwork, SegmentId};

#[derive(Debug, Error)]
pub enum TripError {
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("schema violation at line {line}: {detail}")]
    SchemaViolation { line: u64, detail: String },
    #[error("trip {trip} references unknown segment {segment}")]
    UnknownSegment { trip: u64, segment: SegmentId },
    #[error("trip {0} has non-positive travel time")]
    NonPositiveTime(u64),
    #[error("trip {trip}: segments {a} and {b} are not chainable")]
    BrokenChain {
        trip: u64,
        a: SegmentId,
        b: SegmentId,
    },
    #[error("trip {trip}: dist {dist} m disagrees with path length {path_len} m")]
    DistanceMismatch { trip: u64, dist: f64, path_len: f64 },
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 trips to split, got {0}")]
    TooFewTrips(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: u64,
    /// Unix seconds.
    pub depart_ts: i64,
    pub path: Vec<SegmentId>,
    /// Seconds, > 0.
    pub travel_time: f64,
    pub rebuild_count: u32,
    /// Meters.
    pub dist: f64,
}

/// Relative tolerance between a trip's reported distance and its path length.
pub const DIST_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub max_rebuild_count: u32,
    pub min_length: f64,
    pub max_length: f64,
    pub min_time: f64,
    pub max_time: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_rebuild_count: 0,
            min_length: 500.0,
            max_length: 50_000.0,
            min_time: 60.0,
            max_time: 7200.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), TripError> {
        if !(self.min_length < self.max_length) {
            return Err(TripError::InvalidConfig(
                "min_length must be < max_length".into(),
            ));
        }
        if !(self.min_time < self.max_time) {
            return Err(TripError::InvalidConfig(
                "min_time must be < max_time".into(),
            ));
        }
        Ok(())
    }

    pub fn accepts(&self, trip: &Trip) -> bool {
        trip.rebuild_count <= self.max_rebuild_count
            && trip.dist >= self.min_length
            && trip.dist <= self.max_length
            && trip.travel_time >= self.min_time
            && trip.travel_time <= self.max_time
    }
}

#[derive(Debug, Deserialize)]
struct TripRow {
    trip_id: u64,
    depart_ts: i64,
    segment_path: String,
    travel_time_s: f64,
    rebuild_count: u32,
    dist_m: f64,
}

const TRIP_HEADER: [&str; 6] = [
    "trip_id",
    "depart_ts",
    "segment_path",
    "travel_time_s",
    "rebuild_count",
    "dist_m",
];

/// Reads `trips.csv` and validates every trip against `network`.
pub fn load_trips(path: &Path, network: &RoadNetwork) -> Result<Vec<Trip>, TripError> {
    if !path.exists() {
        return Err(TripError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| TripError::SchemaViolation {
            line: 0,
            detail: e.to_string(),
        })?;
    let headers = reader.headers().map_err(|e| TripError::SchemaViolation {
        line: 1,
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != TRIP_HEADER {
        return Err(TripError::SchemaViolation {
            line: 1,
            detail: format!("expected header {}", TRIP_HEADER.join(",")),
        });
    }
    let mut trips = Vec::new();
    for row in reader.deserialize::<TripRow>() {
        let row = row.map_err(|e| TripError::SchemaViolation {
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        trips.push(parse_trip(row, network, trips.len() as u64 + 2)?);
    }
    Ok(trips)
}

fn parse_trip(row: TripRow, network: &RoadNetwork, line: u64) -> Result<Trip, TripError> {
    let bad = |detail: String| TripError::SchemaViolation { line, detail };
    if row.segment_path.trim().is_empty() {
        return Err(bad("empty segment_path".into()));
    }
    let path = row
        .segment_path
        .split(';')
        .map(|s| {
            s.trim()
                .parse::<SegmentId>()
                .map_err(|_| bad(format!("bad segment id {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !(row.travel_time_s > 0.0) || !row.travel_time_s.is_finite() {
        return Err(TripError::NonPositiveTime(row.trip_id));
    }
    if !(row.dist_m > 0.0) || !row.dist_m.is_finite() {
        return Err(bad(format!("dist_m must be > 0, got {}", row.dist_m)));
    }
    let mut path_len = 0.0;
    let mut prev: Option<&crate::graph::Segment> = None;
    for &id in &path {
        let seg = network.segment(id).ok_or(TripError::UnknownSegment {
            trip: row.trip_id,
            segment: id,
        })?;
        if let Some(p) = prev {
            if p.to != seg.from {
                return Err(TripError::BrokenChain {
                    trip: row.trip_id,
                    a: p.id,
                    b: seg.id,
                });
            }
        }
        path_len += seg.length;
        prev = Some(seg);
    }
    if (row.dist_m - path_len).abs() > DIST_TOLERANCE * path_len {
        return Err(TripError::DistanceMismatch {
            trip: row.trip_id,
            dist: row.dist_m,
            path_len,
        });
    }
    Ok(Trip {
        trip_id: row.trip_id,
        depart_ts: row.depart_ts,
        path,
        travel_time: row.travel_time_s,
        rebuild_count: row.rebuild_count,
        dist: row.dist_m,
    })
}

/// Keeps trips passing the rebuild-count, length and duration filters, in order.
pub fn filter_trips(trips: &[Trip], cfg: &FilterConfig) -> Vec<Trip> {
    trips.iter().filter(|t| cfg.accepts(t)).cloned().collect()
}

/// Number of test trips for `n` trips: `test_fraction * n` rounded half-up.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    ((test_fraction * n as f64) + 0.5).floor() as usize
}

/// Uniform random split by trip. Both halves keep the input order.
pub fn split(
    trips: &[Trip],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Trip>, Vec<Trip>), TripError> {
    if trips.len() < 2 {
        return Err(TripError::TooFewTrips(trips.len()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(TripError::InvalidConfig(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let n_test = test_size(trips.len(), test_fraction);
    let mut order: Vec<usize> = (0..trips.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; trips.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = trips.iter().zip(is_test).partition(|(_, test)| *test);
    Ok((
        train.into_iter().map(|(t, _)| t.clone()).collect(),
        test.into_iter().map(|(t, _)| t.clone()).collect(),
    ))
}
