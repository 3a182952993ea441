use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::encoding::{DEFAULT_DEG_MAX, DEFAULT_D_MAX, TIME_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub d: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    pub deg_max: usize,
    pub d_max: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Small model used for tests and desk-scale experiments.
    pub fn toy(feature_dim: usize) -> Self {
        Self {
            layers: 2,
            d: 16,
            heads: 4,
            ffn_mult: 2,
            deg_max: DEFAULT_DEG_MAX,
            d_max: DEFAULT_D_MAX,
            feature_dim,
            seed: 0,
        }
    }

    /// The slim 12-layer, width-80 configuration.
    pub fn slim(feature_dim: usize) -> Self {
        Self {
            layers: 12,
            d: 80,
            heads: 8,
            ffn_mult: 1,
            ..Self::toy(feature_dim)
        }
    }

    pub fn preset(name: &str, feature_dim: usize) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy(feature_dim)),
            "slim" => Some(Self::slim(feature_dim)),
            _ => None,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.d * self.ffn_mult
    }

    pub fn bias_buckets(&self) -> usize {
        self.d_max + 2
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d", self.d),
            ("heads", self.heads),
            ("ffn_mult", self.ffn_mult),
            ("deg_max", self.deg_max),
            ("d_max", self.d_max),
            ("feature_dim", self.feature_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d = {} is not divisible by heads = {}",
                self.d, self.heads
            )));
        }
        if self.d_max + 1 > u16::MAX as usize {
            return Err(ModelError::InvalidConfig("d_max too large".into()));
        }
        Ok(())
    }
}

/// Standardization of travel-time targets, fitted on the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetNorm {
    pub mean: f64,
    pub std: f64,
}

impl Default for TargetNorm {
    fn default() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl TargetNorm {
    pub fn fit(labels: &[f64]) -> Self {
        let n = labels.len().max(1) as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 1e-9 { std } else { 1.0 },
        }
    }

    pub fn normalize(&self, seconds: f64) -> f64 {
        (seconds - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        self.mean + self.std * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_gain: Vec<f64>,
    pub ln1_shift: Vec<f64>,
    /// `d x d`, applied as `x * W`.
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_shift: Vec<f64>,
    /// `d x ffn_dim`.
    pub ffn_w1: Vec<f64>,
    pub ffn_b1: Vec<f64>,
    /// `ffn_dim x d`.
    pub ffn_w2: Vec<f64>,
    pub ffn_b2: Vec<f64>,
}

/// Every learnable tensor, in the order they are serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `feature_dim x d`.
    pub input_w: Vec<f64>,
    pub input_b: Vec<f64>,
    /// `(deg_max + 1) x d`, indexed by indegree bucket.
    pub z_in: Vec<f64>,
    /// `(deg_max + 1) x d`, indexed by outdegree bucket.
    pub z_out: Vec<f64>,
    /// `heads x (d_max + 2)`, shared by all layers.
    pub spatial_bias: Vec<f64>,
    pub layers: Vec<LayerWeights>,
    /// `(d + TIME_FEATURES) x d`.
    pub readout_w1: Vec<f64>,
    pub readout_b1: Vec<f64>,
    /// `d x 1`.
    pub readout_w2: Vec<f64>,
    pub readout_b2: Vec<f64>,
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d;
        let f = cfg.ffn_dim();
        let layer = LayerWeights {
            ln1_gain: vec![0.0; d],
            ln1_shift: vec![0.0; d],
            wq: vec![0.0; d * d],
            wk: vec![0.0; d * d],
            wv: vec![0.0; d * d],
            wo: vec![0.0; d * d],
            ln2_gain: vec![0.0; d],
            ln2_shift: vec![0.0; d],
            ffn_w1: vec![0.0; d * f],
            ffn_b1: vec![0.0; f],
            ffn_w2: vec![0.0; f * d],
            ffn_b2: vec![0.0; d],
        };
        Self {
            input_w: vec![0.0; cfg.feature_dim * d],
            input_b: vec![0.0; d],
            z_in: vec![0.0; (cfg.deg_max + 1) * d],
            z_out: vec![0.0; (cfg.deg_max + 1) * d],
            spatial_bias: vec![0.0; cfg.heads * cfg.bias_buckets()],
            layers: vec![layer; cfg.layers],
            readout_w1: vec![0.0; (d + TIME_FEATURES) * d],
            readout_b1: vec![0.0; d],
            readout_w2: vec![0.0; d],
            readout_b2: vec![0.0; 1],
        }
    }

    /// Named views in serialization order.
    pub fn named(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out: Vec<(String, &Vec<f64>)> = vec![
            ("input_w".into(), &self.input_w),
            ("input_b".into(), &self.input_b),
            ("z_in".into(), &self.z_in),
            ("z_out".into(), &self.z_out),
            ("spatial_bias".into(), &self.spatial_bias),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            let fields: [(&str, &Vec<f64>); 12] = [
                ("ln1_gain", &layer.ln1_gain),
                ("ln1_shift", &layer.ln1_shift),
                ("wq", &layer.wq),
                ("wk", &layer.wk),
                ("wv", &layer.wv),
                ("wo", &layer.wo),
                ("ln2_gain", &layer.ln2_gain),
                ("ln2_shift", &layer.ln2_shift),
                ("ffn_w1", &layer.ffn_w1),
                ("ffn_b1", &layer.ffn_b1),
                ("ffn_w2", &layer.ffn_w2),
                ("ffn_b2", &layer.ffn_b2),
            ];
            out.extend(
                fields
                    .into_iter()
                    .map(|(n, t)| (format!("layers.{l}.{n}"), t)),
            );
        }
        out.extend([
            ("readout_w1".into(), &self.readout_w1),
            ("readout_b1".into(), &self.readout_b1),
            ("readout_w2".into(), &self.readout_w2),
            ("readout_b2".into(), &self.readout_b2),
        ]);
        out
    }

    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    /// Mutable views in the same order as [`Weights::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![
            &mut self.input_w,
            &mut self.input_b,
            &mut self.z_in,
            &mut self.z_out,
            &mut self.spatial_bias,
        ];
        for layer in &mut self.layers {
            out.extend([
                &mut layer.ln1_gain,
                &mut layer.ln1_shift,
                &mut layer.wq,
                &mut layer.wk,
                &mut layer.wv,
                &mut layer.wo,
                &mut layer.ln2_gain,
                &mut layer.ln2_shift,
                &mut layer.ffn_w1,
                &mut layer.ffn_b1,
                &mut layer.ffn_w2,
                &mut layer.ffn_b2,
            ]);
        }
        out.extend([
            &mut self.readout_w1,
            &mut self.readout_b1,
            &mut self.readout_w2,
            &mut self.readout_b2,
        ]);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Weights) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub norm: TargetNorm,
    pub weights: Weights,
}

impl ModelParams {
    /// Matrices `U(-1/sqrt(d), 1/sqrt(d))`, embedding tables `N(0, 0.02)`,
    /// biases, shifts and the spatial bias table zero, layer-norm gains one.
    pub fn init(cfg: &ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bound = 1.0 / (cfg.d as f64).sqrt();
        let embed = Normal::new(0.0, 0.02).expect("valid normal");
        let mut w = Weights::zeros(cfg);
        let mut uniform = |t: &mut Vec<f64>| {
            for v in t.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        };
        uniform(&mut w.input_w);
        for layer in &mut w.layers {
            uniform(&mut layer.wq);
            uniform(&mut layer.wk);
            uniform(&mut layer.wv);
            uniform(&mut layer.wo);
            uniform(&mut layer.ffn_w1);
            uniform(&mut layer.ffn_w2);
            layer.ln1_gain.fill(1.0);
            layer.ln2_gain.fill(1.0);
        }
        uniform(&mut w.readout_w1);
        uniform(&mut w.readout_w2);
        for v in w.z_in.iter_mut().chain(w.z_out.iter_mut()) {
            *v = embed.sample(&mut rng);
        }
        Ok(Self {
            config: *cfg,
            norm: TargetNorm::default(),
            weights: w,
        })
    }

    pub fn layer(&self, l: usize) -> &LayerWeights {
        &self.weights.layers[l]
    }
}
