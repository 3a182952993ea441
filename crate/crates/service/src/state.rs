//! Loaded per-city state and the route query handler.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use transtte::encoding::RouteEncoder;
use transtte::graph::{NodeId, RoadNetwork};
use transtte::model::{self, load_params, model_version, ModelParams};
use transtte::poi::{haversine, load_pois, segment_weights, SegmentWeights};
use transtte::router::{route_by_type, RouteKind};
use transtte::SegmentId;

use crate::config::{CityConfig, ServiceConfig};
use crate::error::ServiceError;

/// Nearest node by great-circle distance; ties go to the smaller node id.
pub fn snap_to_node(network: &RoadNetwork, lat: f64, lon: f64) -> Result<NodeId, ServiceError> {
    network
        .nodes()
        .iter()
        .map(|n| (haversine(lat, lon, n.lat, n.lon), n.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or(ServiceError::EmptyNetwork)
}

/// A route endpoint: a node id, `{"lat": .., "lon": ..}`, or `[lat, lon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Node(NodeId),
    Coord { lat: f64, lon: f64 },
    Pair([f64; 2]),
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    /// `"17"` or `"54.98,73.37"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(id) = s.trim().parse::<NodeId>() {
            return Ok(Endpoint::Node(id));
        }
        let parts: Vec<&str> = s.split(',').collect();
        if let [lat, lon] = parts[..] {
            if let (Ok(lat), Ok(lon)) = (lat.trim().parse(), lon.trim().parse()) {
                return Ok(Endpoint::Coord { lat, lon });
            }
        }
        Err(format!("expected a node id or `lat,lon`, got {s:?}"))
    }
}

impl Endpoint {
    fn resolve(&self, network: &RoadNetwork) -> Result<NodeId, ServiceError> {
        let (lat, lon) = match *self {
            Endpoint::Node(id) => {
                return network.node(id).map(|n| n.id).ok_or(ServiceError::Route(
                    transtte::router::RouteError::UnknownNode(id),
                ))
            }
            Endpoint::Coord { lat, lon } => (lat, lon),
            Endpoint::Pair([lat, lon]) => (lat, lon),
        };
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(ServiceError::BadRequest(format!(
                "coordinate ({lat}, {lon}) out of range"
            )));
        }
        snap_to_node(network, lat, lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    pub origin: Endpoint,
    pub destination: Endpoint,
    pub depart_ts: i64,
    pub kind: RouteKind,
    pub city: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub path: Vec<SegmentId>,
    pub polyline: Vec<[f64; 2]>,
    pub eta: f64,
    pub total_length: f64,
    pub kind: RouteKind,
    pub model_version: String,
}

/// Everything needed to answer queries for one city. Immutable once built.
#[derive(Debug)]
pub struct CityState {
    pub name: String,
    pub network: RoadNetwork,
    pub picturesque: Option<SegmentWeights>,
    pub historic: Option<SegmentWeights>,
    pub params: ModelParams,
    pub model_version: String,
}

impl CityState {
    pub fn new(
        name: impl Into<String>,
        network: RoadNetwork,
        params: ModelParams,
        picturesque: Option<SegmentWeights>,
        historic: Option<SegmentWeights>,
    ) -> Self {
        let model_version = model_version(&params);
        Self {
            name: name.into(),
            network,
            picturesque,
            historic,
            params,
            model_version,
        }
    }

    pub fn load(name: &str, city: &CityConfig, cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let network = RoadNetwork::load(&city.nodes, &city.edges)?;
        let params = load_params(&city.params)?;
        if params.config.feature_dim != transtte::encoding::node_feature_dim(&network) {
            return Err(ServiceError::Config(format!(
                "model for {name} expects {} node features, network provides {}",
                params.config.feature_dim,
                transtte::encoding::node_feature_dim(&network)
            )));
        }
        let (picturesque, historic) = match &city.pois {
            Some(path) => {
                let pois = load_pois(path)?;
                let r = cfg.poi_radius_m;
                (
                    Some(segment_weights(
                        &network,
                        &pois,
                        r,
                        &cfg.categories.picturesque,
                    )?),
                    Some(segment_weights(
                        &network,
                        &pois,
                        r,
                        &cfg.categories.historic,
                    )?),
                )
            }
            None => (None, None),
        };
        Ok(Self::new(name, network, params, picturesque, historic))
    }

    pub fn handle_route(&self, req: &RouteRequest) -> Result<RouteResponse, ServiceError> {
        let origin = req.origin.resolve(&self.network)?;
        let destination = req.destination.resolve(&self.network)?;
        let weights = match req.kind {
            RouteKind::Fastest => None,
            RouteKind::Picturesque => self.picturesque.as_ref(),
            RouteKind::Historic => self.historic.as_ref(),
        };
        let route = route_by_type(&self.network, origin, destination, req.kind, weights)?;
        if route.path.is_empty() {
            return Err(ServiceError::BadRequest(
                "origin and destination snap to the same node".into(),
            ));
        }
        let cfg = &self.params.config;
        let encoder = RouteEncoder::new(&self.network, cfg.d_max, cfg.deg_max);
        let encoded = encoder.encode(&route.path, req.depart_ts)?;
        let eta = model::forward(&self.params, &encoded)?.max(1.0);
        let node = |id: NodeId| {
            let n = self.network.node(id).expect("route node exists");
            [n.lat, n.lon]
        };
        let mut polyline = vec![node(origin)];
        for &s in &route.path {
            polyline.push(node(
                self.network.segment(s).expect("route segment").to_node,
            ));
        }
        Ok(RouteResponse {
            path: route.path,
            polyline,
            eta,
            total_length: route.total_length,
            kind: req.kind,
            model_version: self.model_version.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityInfo {
    pub name: String,
    pub nodes: usize,
    pub segments: usize,
    pub has_pois: bool,
    pub model_version: String,
}

/// All loaded cities, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub cities: BTreeMap<String, Arc<CityState>>,
}

impl AppState {
    pub fn insert(&mut self, city: CityState) {
        self.cities.insert(city.name.clone(), Arc::new(city));
    }

    /// Loads every configured city, or only `only` when given.
    pub fn load(cfg: &ServiceConfig, only: Option<&str>) -> Result<Self, ServiceError> {
        let mut state = Self::default();
        for (name, city) in &cfg.cities {
            if only.is_some_and(|o| o != name) {
                continue;
            }
            state.insert(CityState::load(name, city, cfg)?);
        }
        if let Some(o) = only {
            if !state.cities.contains_key(o) {
                return Err(ServiceError::CityNotLoaded(o.to_owned()));
            }
        }
        Ok(state)
    }

    pub fn handle_route(&self, req: &RouteRequest) -> Result<RouteResponse, ServiceError> {
        self.cities
            .get(&req.city)
            .ok_or_else(|| ServiceError::CityNotLoaded(req.city.clone()))?
            .handle_route(req)
    }

    pub fn city_infos(&self) -> Vec<CityInfo> {
        self.cities
            .values()
            .map(|c| CityInfo {
                name: c.name.clone(),
                nodes: c.network.node_count(),
                segments: c.network.segment_count(),
                has_pois: c.picturesque.is_some(),
                model_version: c.model_version.clone(),
            })
            .collect()
    }
}
