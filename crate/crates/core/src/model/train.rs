//! Minibatch training loop and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::gradient;
use super::forward::forward;
use super::optim::{adamw_step, AdamWConfig, OptimState};
use super::params::{ModelConfig, ModelParams, TargetNorm};
use super::ModelError;
use crate::encoding::{EncodedRoute, RouteEncoder};
use crate::metrics::{mae, rmse};
use crate::trips::Trip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: AdamWConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stops after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamWConfig::default(),
            batch_size: 16,
            epochs: 20,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub train_mae: f64,
    pub val_mae: f64,
}

fn encode(encoder: &RouteEncoder, trip: &Trip) -> Result<(EncodedRoute, f64), ModelError> {
    Ok((
        encoder.encode(&trip.path, trip.depart_ts)?,
        trip.travel_time,
    ))
}

/// Predictions in seconds, one per trip.
pub fn predict(
    params: &ModelParams,
    encoder: &RouteEncoder,
    trips: &[Trip],
) -> Result<Vec<f64>, ModelError> {
    trips
        .iter()
        .map(|t| forward(params, &encoder.encode(&t.path, t.depart_ts)?))
        .collect()
}

/// `(MAE, RMSE)` in seconds.
pub fn evaluate(
    params: &ModelParams,
    encoder: &RouteEncoder,
    trips: &[Trip],
) -> Result<(f64, f64), ModelError> {
    if trips.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let pred = predict(params, encoder, trips)?;
    let truth: Vec<f64> = trips.iter().map(|t| t.travel_time).collect();
    Ok((mae(&pred, &truth)?, rmse(&pred, &truth)?))
}

/// Trains from `ModelParams::init(cfg)` and returns the parameters with the
/// best validation MAE together with per-epoch history. Deterministic for a
/// given `cfg.seed`.
pub fn train(
    encoder: &RouteEncoder,
    train_set: &[Trip],
    val_set: &[Trip],
    cfg: &ModelConfig,
    hyper: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>), ModelError> {
    train_with(encoder, train_set, val_set, cfg, hyper, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    encoder: &RouteEncoder,
    train_set: &[Trip],
    val_set: &[Trip],
    cfg: &ModelConfig,
    hyper: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, Vec<EpochStats>), ModelError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if hyper.batch_size == 0 {
        return Err(ModelError::InvalidConfig(
            "batch_size must be positive".into(),
        ));
    }
    if cfg.d_max != encoder.d_max || cfg.deg_max != encoder.deg_max {
        return Err(ModelError::InvalidConfig(
            "encoder buckets differ from model config".into(),
        ));
    }
    let mut params = ModelParams::init(cfg)?;
    let labels: Vec<f64> = train_set.iter().map(|t| t.travel_time).collect();
    params.norm = TargetNorm::fit(&labels);
    let mut state = OptimState::new(cfg, hyper.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1e);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut steps = 0usize;
    'epochs: for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut stop = false;
        for chunk in order.chunks(hyper.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| encode(encoder, &train_set[i]))
                .collect::<Result<Vec<_>, _>>()?;
            let (loss, grads) = gradient(&params, &batch)?;
            adamw_step(&mut params.weights, &grads, &mut state)?;
            loss_sum += loss;
            batches += 1;
            steps += 1;
            if hyper.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        if !params.weights.all_finite() {
            return Err(ModelError::NonFiniteActivation);
        }
        let (train_mae, _) = evaluate(&params, encoder, train_set)?;
        let (val_mae, _) = evaluate(&params, encoder, val_set)?;
        let stats = EpochStats {
            epoch,
            steps,
            train_loss: loss_sum / batches.max(1) as f64,
            train_mae,
            val_mae,
        };
        on_epoch(&stats);
        history.push(stats);
        if best.as_ref().is_none_or(|(b, _)| val_mae < *b) {
            best = Some((val_mae, params.clone()));
        }
        if stop {
            break 'epochs;
        }
    }
    Ok((best.map(|(_, p)| p).unwrap_or(params), history))
}
