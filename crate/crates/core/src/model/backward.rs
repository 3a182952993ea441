//! Reverse-mode gradients of the mean batch loss.

use super::forward::{forward_trace, huber, huber_grad, ForwardTrace};
use super::ops::{self, gelu_grad};
use super::params::{ModelParams, Weights};
use super::ModelError;
use crate::encoding::{EncodedRoute, TIME_FEATURES};

/// Mean batch loss and its gradient with respect to every weight.
pub fn gradient(
    params: &ModelParams,
    batch: &[(EncodedRoute, f64)],
) -> Result<(f64, Weights), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut grads = Weights::zeros(&params.config);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (route, truth) in batch {
        let trace = forward_trace(params, route)?;
        let residual = trace.normalized - params.norm.normalize(*truth);
        total += huber(residual);
        backward(
            params,
            route,
            &trace,
            huber_grad(residual) * scale,
            &mut grads,
        );
    }
    Ok((total * scale, grads))
}

/// Accumulates into `grads` the gradient of `dout * normalized_output`.
pub fn backward(
    params: &ModelParams,
    route: &EncodedRoute,
    trace: &ForwardTrace,
    dout: f64,
    grads: &mut Weights,
) {
    let cfg = &params.config;
    let w = &params.weights;
    let (n, d, fd, heads) = (trace.n, cfg.d, cfg.ffn_dim(), cfg.heads);
    let dr = d + TIME_FEATURES;

    // readout
    grads.readout_b2[0] += dout;
    let mut dpre = vec![0.0; d];
    for c in 0..d {
        grads.readout_w2[c] += dout * trace.readout_hidden[c];
        dpre[c] = dout * w.readout_w2[c] * gelu_grad(trace.readout_pre[c]);
    }
    ops::add_assign(&mut grads.readout_b1, &dpre);
    ops::add_at_b(&mut grads.readout_w1, &trace.readout_in, &dpre, 1, dr, d);
    let din = ops::matmul_bt(&dpre, &w.readout_w1, 1, d, dr);

    // mean pooling
    let mut dh = vec![0.0; n * d];
    for row in dh.chunks_mut(d) {
        for (v, g) in row.iter_mut().zip(&din[..d]) {
            *v = g / n as f64;
        }
    }

    let buckets = cfg.bias_buckets();
    let dh_dim = d / heads;
    let scale = 1.0 / (dh_dim as f64).sqrt();
    for (l, lt) in trace.layers.iter().enumerate().rev() {
        let layer = &w.layers[l];
        let g = &mut grads.layers[l];

        // feed-forward branch
        ops::add_col_sums(&mut g.ffn_b2, &dh);
        ops::add_at_b(&mut g.ffn_w2, &lt.ffn_act, &dh, n, fd, d);
        let mut du = ops::matmul_bt(&dh, &layer.ffn_w2, n, d, fd);
        for (v, &x) in du.iter_mut().zip(&lt.ffn_pre) {
            *v *= gelu_grad(x);
        }
        ops::add_col_sums(&mut g.ffn_b1, &du);
        ops::add_at_b(&mut g.ffn_w1, &lt.ln2_out, &du, n, d, fd);
        let dln2 = ops::matmul_bt(&du, &layer.ffn_w1, n, fd, d);
        let dmid_ln = ops::layer_norm_backward(
            &dln2,
            &lt.ln2_xhat,
            &lt.ln2_inv_std,
            &layer.ln2_gain,
            &mut g.ln2_gain,
            &mut g.ln2_shift,
            d,
        );
        let mut dmid = dh;
        ops::add_assign(&mut dmid, &dmid_ln);

        // attention branch
        let at = &lt.attn;
        ops::add_at_b(&mut g.wo, &at.context, &dmid, n, d, d);
        let dctx = ops::matmul_bt(&dmid, &layer.wo, n, d, d);
        let mut dq = vec![0.0; n * d];
        let mut dk = vec![0.0; n * d];
        let mut dv = vec![0.0; n * d];
        let mut dp = vec![0.0; n];
        for hd in 0..heads {
            let c0 = hd * dh_dim;
            let c1 = c0 + dh_dim;
            for i in 0..n {
                let probs = &at.probs[(hd * n + i) * n..(hd * n + i + 1) * n];
                let dci = &dctx[i * d + c0..i * d + c1];
                for j in 0..n {
                    dp[j] = ops::dot(dci, &at.v[j * d + c0..j * d + c1]);
                    for (o, &gc) in dv[j * d + c0..j * d + c1].iter_mut().zip(dci) {
                        *o += probs[j] * gc;
                    }
                }
                let mean = ops::dot(probs, &dp);
                for j in 0..n {
                    let ds = probs[j] * (dp[j] - mean);
                    if ds == 0.0 {
                        continue;
                    }
                    grads.spatial_bias[hd * buckets + route.spatial.get(i, j)] += ds;
                    let ds = ds * scale;
                    for c in c0..c1 {
                        dq[i * d + c] += ds * at.k[j * d + c];
                        dk[j * d + c] += ds * at.q[i * d + c];
                    }
                }
            }
        }
        let g = &mut grads.layers[l];
        ops::add_at_b(&mut g.wq, &lt.ln1_out, &dq, n, d, d);
        ops::add_at_b(&mut g.wk, &lt.ln1_out, &dk, n, d, d);
        ops::add_at_b(&mut g.wv, &lt.ln1_out, &dv, n, d, d);
        let mut dln1 = ops::matmul_bt(&dq, &layer.wq, n, d, d);
        ops::add_assign(&mut dln1, &ops::matmul_bt(&dk, &layer.wk, n, d, d));
        ops::add_assign(&mut dln1, &ops::matmul_bt(&dv, &layer.wv, n, d, d));
        let dx_ln = ops::layer_norm_backward(
            &dln1,
            &lt.ln1_xhat,
            &lt.ln1_inv_std,
            &layer.ln1_gain,
            &mut g.ln1_gain,
            &mut g.ln1_shift,
            d,
        );
        ops::add_assign(&mut dmid, &dx_ln);
        dh = dmid;
    }

    // input embedding
    ops::add_col_sums(&mut grads.input_b, &dh);
    ops::add_at_b(
        &mut grads.input_w,
        &route.features,
        &dh,
        n,
        cfg.feature_dim,
        d,
    );
    for (i, &(bin, bout)) in route.centrality.buckets.iter().enumerate() {
        let row = &dh[i * d..(i + 1) * d];
        ops::add_assign(&mut grads.z_in[bin * d..(bin + 1) * d], row);
        ops::add_assign(&mut grads.z_out[bout * d..(bout + 1) * d], row);
    }
}
