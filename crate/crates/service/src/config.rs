//! JSON service configuration.
//!
//! ```json
//! {
//!   "cities": {
//!     "omsk": {
//!       "nodes": "omsk/nodes.csv",
//!       "edges": "omsk/edges.csv",
//!       "trips": "omsk/trips.csv",
//!       "pois": "omsk/pois.csv",
//!       "params": "omsk/model.bin"
//!     }
//!   },
//!   "filter": { "max_rebuild_count": 0, "min_length": 500, "max_length": 50000,
//!               "min_time": 60, "max_time": 7200 },
//!   "poi_radius_m": 100,
//!   "model_preset": "toy",
//!   "categories": { "picturesque": ["nature", "culture"], "historic": ["historic"] },
//!   "training": { "batch_size": 16, "epochs": 20 },
//!   "test_fraction": 0.2,
//!   "seed": 42
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use transtte::poi::{Category, DEFAULT_RADIUS_M};
use transtte::{FilterConfig, TrainConfig};

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityConfig {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    #[serde(default)]
    pub trips: Option<PathBuf>,
    #[serde(default)]
    pub pois: Option<PathBuf>,
    pub params: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub picturesque: BTreeSet<Category>,
    pub historic: BTreeSet<Category>,
}

impl Default for CategoryMap {
    fn default() -> Self {
        Self {
            picturesque: [Category::Nature, Category::Culture].into(),
            historic: [Category::Historic].into(),
        }
    }
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS_M
}

fn default_preset() -> String {
    "toy".into()
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_val_fraction() -> f64 {
    0.1
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub cities: BTreeMap<String, CityConfig>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default = "default_radius")]
    pub poi_radius_m: f64,
    #[serde(default = "default_preset")]
    pub model_preset: String,
    #[serde(default)]
    pub categories: CategoryMap,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Share of the training split held out for model selection.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ServiceConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ServiceError> {
        let mut cfg: ServiceConfig =
            serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for city in cfg.cities.values_mut() {
            resolve(&mut city.nodes);
            resolve(&mut city.edges);
            resolve(&mut city.params);
            if let Some(p) = city.trips.as_mut() {
                resolve(p);
            }
            if let Some(p) = city.pois.as_mut() {
                resolve(p);
            }
        }
        cfg.filter
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        if !(cfg.poi_radius_m > 0.0) {
            return Err(ServiceError::Config("poi_radius_m must be > 0".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn city(&self, name: &str) -> Result<&CityConfig, ServiceError> {
        self.cities
            .get(name)
            .ok_or_else(|| ServiceError::CityNotLoaded(name.to_owned()))
    }
}
