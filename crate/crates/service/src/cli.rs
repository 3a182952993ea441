//! `transtte ingest|train|eval|route|serve --config <path>`.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use transtte::encoding::{node_feature_dim, RouteEncoder};
use transtte::model::{self, load_params, save_params, ModelConfig};
use transtte::poi::load_pois;
use transtte::router::RouteKind;
use transtte::trips::{filter_trips, load_trips, split};
use transtte::{RoadNetwork, Trip};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::state::{AppState, Endpoint, RouteRequest};

pub const CONFIG_ENV: &str = "TRANSTTE_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "transtte", about = "Travel time estimation and themed routing")]
struct Cli {
    /// Service config file; falls back to $TRANSTTE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate datasets and report filtering statistics.
    Ingest {
        #[arg(long)]
        city: Option<String>,
    },
    /// Train a model per city and write its parameter file.
    Train {
        #[arg(long)]
        city: Option<String>,
    },
    /// Report MAE/RMSE of saved models on the train and test splits.
    Eval {
        #[arg(long)]
        city: Option<String>,
    },
    /// Answer one route query and print the response as JSON.
    Route {
        /// Node id or `lat,lon`.
        #[arg(long, allow_hyphen_values = true)]
        from: Endpoint,
        #[arg(long, allow_hyphen_values = true)]
        to: Endpoint,
        #[arg(long, default_value = "fastest")]
        kind: RouteKind,
        #[arg(long)]
        city: String,
        /// Departure time, unix seconds. Defaults to now.
        #[arg(long)]
        depart: Option<i64>,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

enum Failure {
    Usage(String),
    Runtime(ServiceError),
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let path = cli
        .config
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .ok_or_else(|| Failure::Usage(format!("--config is required (or set {CONFIG_ENV})")))?;
    let cfg = ServiceConfig::load(&path)?;
    match cli.command {
        Command::Ingest { city } => ingest(&cfg, city.as_deref(), out),
        Command::Train { city } => train(&cfg, city.as_deref(), out, err),
        Command::Eval { city } => eval(&cfg, city.as_deref(), out),
        Command::Route {
            from,
            to,
            kind,
            city,
            depart,
        } => {
            let state = AppState::load(&cfg, Some(&city))?;
            let depart_ts = depart.unwrap_or_else(now);
            let req = RouteRequest {
                origin: from,
                destination: to,
                depart_ts,
                kind,
                city,
            };
            let resp = state.handle_route(&req)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&resp).expect("serializable")
            )?;
            Ok(())
        }
        Command::Serve { addr } => {
            let state = AppState::load(&cfg, None)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(state, addr))?;
            Ok(())
        }
    }
}

fn now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

fn selected<'a>(cfg: &'a ServiceConfig, only: Option<&str>) -> Result<Vec<&'a str>, Failure> {
    match only {
        Some(name) => {
            cfg.city(name)?;
            Ok(vec![cfg
                .cities
                .get_key_value(name)
                .expect("checked")
                .0
                .as_str()])
        }
        None => Ok(cfg.cities.keys().map(String::as_str).collect()),
    }
}

type Splits = (Vec<Trip>, Vec<Trip>, Vec<Trip>);

struct Dataset {
    network: RoadNetwork,
    total: usize,
    kept: Vec<Trip>,
}

impl Dataset {
    fn load(cfg: &ServiceConfig, name: &str) -> Result<Self, ServiceError> {
        let city = cfg.city(name)?;
        let network = RoadNetwork::load(&city.nodes, &city.edges)?;
        let trips_path = city
            .trips
            .as_ref()
            .ok_or_else(|| ServiceError::Config(format!("city {name} has no trips file")))?;
        let trips = load_trips(trips_path, &network)?;
        let kept = filter_trips(&trips, &cfg.filter);
        Ok(Self {
            network,
            total: trips.len(),
            kept,
        })
    }

    /// `(train, validation, test)`; deterministic given the config seed.
    fn splits(&self, cfg: &ServiceConfig) -> Result<Splits, ServiceError> {
        let (train_all, test) = split(&self.kept, cfg.test_fraction, cfg.seed)?;
        let (train, val) = split(&train_all, cfg.val_fraction, cfg.seed.wrapping_add(1))?;
        Ok((train, val, test))
    }
}

fn ingest(cfg: &ServiceConfig, only: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    for name in selected(cfg, only)? {
        let data = Dataset::load(cfg, name)?;
        let pois = match &cfg.city(name)?.pois {
            Some(p) => Some(load_pois(p).map_err(ServiceError::from)?.len()),
            None => None,
        };
        let report = json!({
            "city": name,
            "nodes": data.network.node_count(),
            "segments": data.network.segment_count(),
            "features": data.network.feature_names(),
            "trips_total": data.total,
            "trips_kept": data.kept.len(),
            "trips_dropped": data.total - data.kept.len(),
            "pois": pois,
        });
        writeln!(out, "{report}")?;
    }
    Ok(())
}

fn metrics_json((mae, rmse): (f64, f64)) -> serde_json::Value {
    json!({ "mae": mae, "rmse": rmse })
}

fn train(
    cfg: &ServiceConfig,
    only: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    for name in selected(cfg, only)? {
        let data = Dataset::load(cfg, name)?;
        let (train_set, val_set, test_set) = data.splits(cfg)?;
        let model_cfg = ModelConfig::preset(&cfg.model_preset, node_feature_dim(&data.network))
            .ok_or_else(|| Failure::Usage(format!("unknown model preset {:?}", cfg.model_preset)))?
            .with_seed(cfg.seed);
        let encoder = RouteEncoder::new(&data.network, model_cfg.d_max, model_cfg.deg_max);
        let (params, history) = model::train_with(
            &encoder,
            &train_set,
            &val_set,
            &model_cfg,
            &cfg.training,
            |e| {
                let _ = writeln!(
                    err,
                    "[{name}] epoch {:>3} steps {:>6} loss {:.4} train MAE {:.2} val MAE {:.2}",
                    e.epoch, e.steps, e.train_loss, e.train_mae, e.val_mae
                );
            },
        )
        .map_err(ServiceError::from)?;
        let params_path = &cfg.city(name)?.params;
        if let Some(dir) = params_path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        save_params(&params, params_path).map_err(ServiceError::from)?;
        let report = json!({
            "city": name,
            "epochs": history.len(),
            "train": metrics_json(model::evaluate(&params, &encoder, &train_set).map_err(ServiceError::from)?),
            "val": metrics_json(model::evaluate(&params, &encoder, &val_set).map_err(ServiceError::from)?),
            "test": metrics_json(model::evaluate(&params, &encoder, &test_set).map_err(ServiceError::from)?),
            "params": params_path,
            "model_version": model::model_version(&params),
        });
        writeln!(out, "{report}")?;
    }
    Ok(())
}

fn eval(cfg: &ServiceConfig, only: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    for name in selected(cfg, only)? {
        let data = Dataset::load(cfg, name)?;
        let (mut train_set, val_set, test_set) = data.splits(cfg)?;
        train_set.extend(val_set);
        let params = load_params(&cfg.city(name)?.params).map_err(ServiceError::from)?;
        let encoder = RouteEncoder::new(&data.network, params.config.d_max, params.config.deg_max);
        let report = json!({
            "city": name,
            "train": metrics_json(model::evaluate(&params, &encoder, &train_set).map_err(ServiceError::from)?),
            "test": metrics_json(model::evaluate(&params, &encoder, &test_set).map_err(ServiceError::from)?),
            "model_version": model::model_version(&params),
        });
        writeln!(out, "{report}")?;
    }
    Ok(())
}
