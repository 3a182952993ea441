//! Forward pass. Every intermediate needed by backpropagation is kept in a
//! [`ForwardTrace`].

use super::ops::{self, gelu};
use super::params::{LayerWeights, ModelParams};
use super::ModelError;
use crate::encoding::{EncodedRoute, SpatialEncodingTable, TIME_FEATURES};

/// Width of the smooth region of the training loss, in normalized units.
pub const HUBER_DELTA: f64 = 0.05;

/// `H0[i] = features[i] * W_in + b_in + z_in[in_bucket[i]] + z_out[out_bucket[i]]`.
pub fn input_embedding(params: &ModelParams, route: &EncodedRoute) -> Result<Vec<f64>, ModelError> {
    let cfg = &params.config;
    check_route(params, route)?;
    let n = route.n();
    let d = cfg.d;
    let w = &params.weights;
    let mut h = ops::matmul(&route.features, &w.input_w, n, cfg.feature_dim, d);
    ops::add_row_bias(&mut h, &w.input_b);
    for (i, &(bin, bout)) in route.centrality.buckets.iter().enumerate() {
        let row = &mut h[i * d..(i + 1) * d];
        ops::add_assign(row, &w.z_in[bin * d..(bin + 1) * d]);
        ops::add_assign(row, &w.z_out[bout * d..(bout + 1) * d]);
    }
    Ok(h)
}

fn check_route(params: &ModelParams, route: &EncodedRoute) -> Result<(), ModelError> {
    let cfg = &params.config;
    let n = route.n();
    let mismatch = |what: String| Err(ModelError::ShapeMismatch(what));
    if n == 0 {
        return mismatch("route has no nodes".into());
    }
    if route.feature_dim != cfg.feature_dim || route.features.len() != n * cfg.feature_dim {
        return mismatch(format!(
            "features are {} wide, model expects {}",
            route.feature_dim, cfg.feature_dim
        ));
    }
    if route.spatial.n() != n {
        return mismatch(format!("phi is {0}x{0} for {n} nodes", route.spatial.n()));
    }
    if route.spatial.d_max() != cfg.d_max {
        return mismatch(format!(
            "phi built with d_max {}, model uses {}",
            route.spatial.d_max(),
            cfg.d_max
        ));
    }
    if route
        .centrality
        .buckets
        .iter()
        .any(|&(a, b)| a > cfg.deg_max || b > cfg.deg_max)
    {
        return mismatch("degree bucket exceeds deg_max".into());
    }
    Ok(())
}

/// Per-head bias matrix `B[h][i][j] = spatial_bias[h][phi[i][j]]`, laid out
/// `heads x n x n`.
pub fn attention_bias(spatial_bias: &[f64], heads: usize, phi: &SpatialEncodingTable) -> Vec<f64> {
    let n = phi.n();
    let buckets = spatial_bias.len() / heads;
    let mut out = vec![0.0; heads * n * n];
    for h in 0..heads {
        for i in 0..n {
            for j in 0..n {
                out[(h * n + i) * n + j] = spatial_bias[h * buckets + phi.get(i, j)];
            }
        }
    }
    out
}

/// Intermediates of one attention call.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Softmax weights, `heads x n x n`.
    pub probs: Vec<f64>,
    /// Concatenated head outputs before `W_O`, `n x d`.
    pub context: Vec<f64>,
    pub output: Vec<f64>,
}

/// Multi-head self-attention with the spatial bias added to the scaled
/// dot-product scores. `h` is `n x d`.
pub fn attention(
    layer: &LayerWeights,
    spatial_bias: &[f64],
    heads: usize,
    h: &[f64],
    phi: &SpatialEncodingTable,
) -> Result<AttentionTrace, ModelError> {
    let n = phi.n();
    if n == 0 || !h.len().is_multiple_of(n) {
        return Err(ModelError::ShapeMismatch(format!(
            "hidden state of length {} for {n} nodes",
            h.len()
        )));
    }
    let d = h.len() / n;
    if layer.wq.len() != d * d || heads == 0 || !d.is_multiple_of(heads) {
        return Err(ModelError::ShapeMismatch(format!(
            "layer does not match width {d} with {heads} heads"
        )));
    }
    if !spatial_bias.len().is_multiple_of(heads) || spatial_bias.len() / heads < phi.bucket_count()
    {
        return Err(ModelError::ShapeMismatch(
            "spatial bias table too small".into(),
        ));
    }
    let buckets = spatial_bias.len() / heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = ops::matmul(h, &layer.wq, n, d, d);
    let k = ops::matmul(h, &layer.wk, n, d, d);
    let v = ops::matmul(h, &layer.wv, n, d, d);
    let mut probs = vec![0.0; heads * n * n];
    let mut context = vec![0.0; n * d];
    for hd in 0..heads {
        let cols = hd * dh..(hd + 1) * dh;
        for i in 0..n {
            let row = &mut probs[(hd * n + i) * n..(hd * n + i + 1) * n];
            let qi = &q[i * d + cols.start..i * d + cols.end];
            for (j, s) in row.iter_mut().enumerate() {
                let kj = &k[j * d + cols.start..j * d + cols.end];
                *s = ops::dot(qi, kj) * scale + spatial_bias[hd * buckets + phi.get(i, j)];
            }
            ops::softmax(row);
            let out = &mut context[i * d + cols.start..i * d + cols.end];
            for (j, &p) in row.iter().enumerate() {
                for (o, &vv) in out.iter_mut().zip(&v[j * d + cols.start..j * d + cols.end]) {
                    *o += p * vv;
                }
            }
        }
    }
    let output = ops::matmul(&context, &layer.wo, n, d, d);
    Ok(AttentionTrace {
        q,
        k,
        v,
        probs,
        context,
        output,
    })
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Vec<f64>,
    pub ln1_out: Vec<f64>,
    pub ln1_xhat: Vec<f64>,
    pub ln1_inv_std: Vec<f64>,
    pub attn: AttentionTrace,
    /// Residual stream after attention.
    pub mid: Vec<f64>,
    pub ln2_out: Vec<f64>,
    pub ln2_xhat: Vec<f64>,
    pub ln2_inv_std: Vec<f64>,
    /// FFN pre-activation, `n x ffn_dim`.
    pub ffn_pre: Vec<f64>,
    pub ffn_act: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub n: usize,
    pub h0: Vec<f64>,
    pub layers: Vec<LayerTrace>,
    pub h_final: Vec<f64>,
    /// Mean-pooled nodes followed by the time features.
    pub readout_in: Vec<f64>,
    pub readout_pre: Vec<f64>,
    pub readout_hidden: Vec<f64>,
    /// Output in normalized units.
    pub normalized: f64,
    /// Output in seconds.
    pub prediction: f64,
}

impl ForwardTrace {
    /// Softmax weights of every layer.
    pub fn attention_probs(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().map(|l| l.attn.probs.as_slice())
    }
}

pub fn forward_trace(
    params: &ModelParams,
    route: &EncodedRoute,
) -> Result<ForwardTrace, ModelError> {
    let cfg = &params.config;
    let w = &params.weights;
    let (n, d, fd) = (route.n(), cfg.d, cfg.ffn_dim());
    let h0 = input_embedding(params, route)?;
    let mut h = h0.clone();
    let mut layers = Vec::with_capacity(cfg.layers);
    for layer in &w.layers {
        let (ln1_out, ln1_xhat, ln1_inv_std) =
            ops::layer_norm(&h, &layer.ln1_gain, &layer.ln1_shift, d);
        let attn = attention(layer, &w.spatial_bias, cfg.heads, &ln1_out, &route.spatial)?;
        let mut mid = h.clone();
        ops::add_assign(&mut mid, &attn.output);
        let (ln2_out, ln2_xhat, ln2_inv_std) =
            ops::layer_norm(&mid, &layer.ln2_gain, &layer.ln2_shift, d);
        let mut ffn_pre = ops::matmul(&ln2_out, &layer.ffn_w1, n, d, fd);
        ops::add_row_bias(&mut ffn_pre, &layer.ffn_b1);
        let ffn_act: Vec<f64> = ffn_pre.iter().map(|&x| gelu(x)).collect();
        let mut ffn_out = ops::matmul(&ffn_act, &layer.ffn_w2, n, fd, d);
        ops::add_row_bias(&mut ffn_out, &layer.ffn_b2);
        let mut out = mid.clone();
        ops::add_assign(&mut out, &ffn_out);
        layers.push(LayerTrace {
            input: std::mem::replace(&mut h, out),
            ln1_out,
            ln1_xhat,
            ln1_inv_std,
            attn,
            mid,
            ln2_out,
            ln2_xhat,
            ln2_inv_std,
            ffn_pre,
            ffn_act,
        });
    }
    let mut readout_in = vec![0.0; d + TIME_FEATURES];
    for row in h.chunks(d) {
        ops::add_assign(&mut readout_in[..d], row);
    }
    for v in &mut readout_in[..d] {
        *v /= n as f64;
    }
    readout_in[d..].copy_from_slice(&route.time);
    let mut readout_pre = ops::matmul(&readout_in, &w.readout_w1, 1, d + TIME_FEATURES, d);
    ops::add_assign(&mut readout_pre, &w.readout_b1);
    let readout_hidden: Vec<f64> = readout_pre.iter().map(|&x| gelu(x)).collect();
    let normalized = ops::dot(&readout_hidden, &w.readout_w2) + w.readout_b2[0];
    if !normalized.is_finite() {
        return Err(ModelError::NonFiniteActivation);
    }
    Ok(ForwardTrace {
        n,
        h0,
        layers,
        h_final: h,
        readout_in,
        readout_pre,
        readout_hidden,
        normalized,
        prediction: params.norm.denormalize(normalized),
    })
}

/// Predicted travel time in seconds.
pub fn forward(params: &ModelParams, route: &EncodedRoute) -> Result<f64, ModelError> {
    forward_trace(params, route).map(|t| t.prediction)
}

/// Smooth L1 of a normalized residual: quadratic within `HUBER_DELTA`,
/// `|e| - delta/2` outside.
pub fn huber(residual: f64) -> f64 {
    let a = residual.abs();
    if a <= HUBER_DELTA {
        0.5 * residual * residual / HUBER_DELTA
    } else {
        a - 0.5 * HUBER_DELTA
    }
}

pub fn huber_grad(residual: f64) -> f64 {
    if residual.abs() <= HUBER_DELTA {
        residual / HUBER_DELTA
    } else {
        residual.signum()
    }
}

/// Training loss for one prediction, computed on standardized targets.
pub fn loss(params: &ModelParams, pred: f64, truth: f64) -> Result<f64, ModelError> {
    if !pred.is_finite() || !truth.is_finite() {
        return Err(ModelError::NonFinite);
    }
    Ok(huber(
        params.norm.normalize(pred) - params.norm.normalize(truth),
    ))
}
