//! Mixture negative log-likelihood and its exact gradients.
//!
//! The loss of a target `t` under mixture `(π, μ, σ)` is
//! `-log Σ_k π_k · N(t | μ_k, diag(σ_k²))`, evaluated through log-sum-exp
//! with per-dimension independent Gaussians. The batch pass below fuses
//! the trunk/head forward, the loss, and backpropagation over one flat
//! gradient buffer.

use alloc::vec;
use alloc::vec::Vec;

use super::net;
use super::{MdnConfig, MdnError, MdnModel, MixturePrediction};
use crate::chain::JointConfig;

const LN_2PI: f64 = 1.8378770664093453;

/// `-log Σ_k w_k · N(target | means_k, diag(stds_k²))`.
///
/// `means` and `stds` are `K × D` row-major; all quantities must share one
/// space (the trainer uses standardized joint space).
pub fn mixture_nll(weights: &[f64], means: &[f64], stds: &[f64], target: &[f64]) -> f64 {
    let k = weights.len();
    let d = target.len();
    debug_assert_eq!(means.len(), k * d);
    debug_assert_eq!(stds.len(), k * d);
    let mut comp = Vec::with_capacity(k);
    for (ki, &w) in weights.iter().enumerate() {
        let mut log_term = libm::log(w);
        for (di, &t) in target.iter().enumerate() {
            let idx = ki * d + di;
            let sigma = stds[idx];
            let z = (t - means[idx]) / sigma;
            log_term += -0.5 * z * z - libm::log(sigma) - 0.5 * LN_2PI;
        }
        comp.push(log_term);
    }
    -net::log_sum_exp(&comp)
}

/// The loss of a true configuration under a prediction, in the
/// prediction's own (joint) space.
pub fn nll_loss(pred: &MixturePrediction, q_true: &JointConfig) -> Result<f64, MdnError> {
    if q_true.len() != pred.output_dim {
        return Err(MdnError::DimensionMismatch {
            expected: pred.output_dim,
            got: q_true.len(),
        });
    }
    Ok(mixture_nll(&pred.weights, &pred.means, &pred.stds, q_true.as_slice()))
}

/// Preallocated buffers for one batch of forward/backward passes.
pub(crate) struct BatchWorkspace {
    capacity: usize,
    pub(crate) xs: Vec<f64>,
    pub(crate) ts: Vec<f64>,
    /// Per trunk layer: pre-activations, activations, stored sigmoids.
    zs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    sigs: Vec<Vec<f64>>,
    logits: Vec<f64>,
    mu: Vec<f64>,
    spre: Vec<f64>,
    sigma: Vec<f64>,
    /// Sigmoid of `spre` (softplus derivative), kept for the backward pass.
    sigp: Vec<f64>,
    dlogits: Vec<f64>,
    dmu: Vec<f64>,
    dspre: Vec<f64>,
    dh_a: Vec<f64>,
    dh_b: Vec<f64>,
    comp: Vec<f64>,
}

impl BatchWorkspace {
    pub(crate) fn new(config: &MdnConfig, capacity: usize) -> Self {
        let w = config.hidden_width;
        let k = config.components;
        let kd = k * config.output_dim;
        let layers = config.hidden_layers;
        Self {
            capacity,
            xs: vec![0.0; capacity * config.input_dim],
            ts: vec![0.0; capacity * config.output_dim],
            zs: (0..layers).map(|_| vec![0.0; capacity * w]).collect(),
            hs: (0..layers).map(|_| vec![0.0; capacity * w]).collect(),
            sigs: (0..layers).map(|_| vec![0.0; capacity * w]).collect(),
            logits: vec![0.0; capacity * k],
            mu: vec![0.0; capacity * kd],
            spre: vec![0.0; capacity * kd],
            sigma: vec![0.0; capacity * kd],
            sigp: vec![0.0; capacity * kd],
            dlogits: vec![0.0; capacity * k],
            dmu: vec![0.0; capacity * kd],
            dspre: vec![0.0; capacity * kd],
            dh_a: vec![0.0; capacity * w],
            dh_b: vec![0.0; capacity * w],
            comp: vec![0.0; k],
        }
    }

    /// Copy `rows` of scaled inputs/targets into the workspace.
    pub(crate) fn load(&mut self, xs: &[f64], ts: &[f64], rows: usize) {
        assert!(rows <= self.capacity, "batch exceeds workspace capacity");
        self.xs[..xs.len()].copy_from_slice(xs);
        self.ts[..ts.len()].copy_from_slice(ts);
    }
}

/// Forward (and optionally backward) pass over `rows` samples already
/// loaded into the workspace. Returns the mean NLL; when `grads` is given
/// it is overwritten with the exact gradient of that mean.
pub(crate) fn batch_pass(
    model: &MdnModel,
    rows: usize,
    ws: &mut BatchWorkspace,
    grads: Option<&mut [f64]>,
) -> f64 {
    let cfg = *model.config();
    let layout = model.layout().clone();
    let width = cfg.hidden_width;
    let k = cfg.components;
    let d = cfg.output_dim;
    let kd = k * d;
    let layers = cfg.hidden_layers;

    let BatchWorkspace {
        xs,
        ts,
        zs,
        hs,
        sigs,
        logits,
        mu,
        spre,
        sigma,
        sigp,
        dlogits,
        dmu,
        dspre,
        dh_a,
        dh_b,
        comp,
        ..
    } = ws;

    // Trunk forward.
    for layer in 0..layers {
        let (before, rest) = hs.split_at_mut(layer);
        let (input, in_dim): (&[f64], usize) = if layer == 0 {
            (xs, cfg.input_dim)
        } else {
            (&before[layer - 1], width)
        };
        let z = &mut zs[layer];
        net::linear_forward(
            input,
            rows,
            in_dim,
            model.tensor(layout.trunk_weight(layer)),
            model.tensor(layout.trunk_bias(layer)),
            width,
            z,
        );
        net::silu_forward(&z[..rows * width], rows * width, &mut rest[0], &mut sigs[layer]);
    }
    let h_last = &hs[layers - 1];

    // Heads forward.
    net::linear_forward(
        h_last,
        rows,
        width,
        model.tensor(layout.logits_weight()),
        model.tensor(layout.logits_bias()),
        k,
        logits,
    );
    net::linear_forward(
        h_last,
        rows,
        width,
        model.tensor(layout.means_weight()),
        model.tensor(layout.means_bias()),
        kd,
        mu,
    );
    net::linear_forward(
        h_last,
        rows,
        width,
        model.tensor(layout.devs_weight()),
        model.tensor(layout.devs_bias()),
        kd,
        spre,
    );
    for i in 0..rows * kd {
        sigma[i] = net::softplus(spre[i]) + super::SIGMA_FLOOR;
        sigp[i] = net::sigmoid(spre[i]);
    }

    // Mixture loss, plus head-output gradients when requested.
    let want_grads = grads.is_some();
    let inv_rows = 1.0 / rows as f64;
    let mut loss_sum = 0.0;
    for r in 0..rows {
        let logit_row = &logits[r * k..(r + 1) * k];
        let t_row = &ts[r * d..(r + 1) * d];

        let lse_logits = net::log_sum_exp(logit_row);
        for ki in 0..k {
            let mut term = logit_row[ki] - lse_logits;
            for (di, &t) in t_row.iter().enumerate() {
                let idx = r * kd + ki * d + di;
                let z = (t - mu[idx]) / sigma[idx];
                // Stash z for the gradient loop before dmu is written.
                dmu[idx] = z;
                term += -0.5 * z * z - libm::log(sigma[idx]) - 0.5 * LN_2PI;
            }
            comp[ki] = term;
        }
        let lse_comp = net::log_sum_exp(comp);
        loss_sum -= lse_comp;

        if want_grads {
            for ki in 0..k {
                let resp = libm::exp(comp[ki] - lse_comp);
                let weight = libm::exp(logit_row[ki] - lse_logits);
                dlogits[r * k + ki] = (weight - resp) * inv_rows;
                for di in 0..d {
                    let idx = r * kd + ki * d + di;
                    let z = dmu[idx];
                    let s = sigma[idx];
                    dmu[idx] = -resp * z / s * inv_rows;
                    let dsigma = -resp * (z * z - 1.0) / s;
                    dspre[idx] = dsigma * sigp[idx] * inv_rows;
                }
            }
        }
    }
    let loss = loss_sum * inv_rows;

    let Some(grads) = grads else {
        return loss;
    };
    grads.fill(0.0);

    // Heads backward into a shared activation gradient.
    dh_a[..rows * width].fill(0.0);
    for (info_w, info_b, d_out, out_dim) in [
        (layout.logits_weight(), layout.logits_bias(), &*dlogits, k),
        (layout.means_weight(), layout.means_bias(), &*dmu, kd),
        (layout.devs_weight(), layout.devs_bias(), &*dspre, kd),
    ] {
        debug_assert_eq!(info_b.offset, info_w.offset + info_w.len());
        let seg = &mut grads[info_w.offset..info_b.offset + info_b.len()];
        let (dw, db) = seg.split_at_mut(info_w.len());
        net::linear_backward(
            h_last,
            rows,
            width,
            model.tensor(info_w),
            out_dim,
            d_out,
            dw,
            db,
            Some(dh_a),
        );
    }

    // Trunk backward.
    for layer in (0..layers).rev() {
        // dZ = dH ⊙ silu'(Z), in place on dh_a.
        let z = &zs[layer];
        let sig = &sigs[layer];
        for i in 0..rows * width {
            dh_a[i] *= net::silu_grad(z[i], sig[i]);
        }
        let (input, in_dim): (&[f64], usize) = if layer == 0 {
            (xs, cfg.input_dim)
        } else {
            (&hs[layer - 1], width)
        };
        let info_w = layout.trunk_weight(layer);
        let info_b = layout.trunk_bias(layer);
        debug_assert_eq!(info_b.offset, info_w.offset + info_w.len());
        let seg = &mut grads[info_w.offset..info_b.offset + info_b.len()];
        let (dw, db) = seg.split_at_mut(info_w.len());
        let d_input = if layer > 0 {
            dh_b[..rows * in_dim].fill(0.0);
            Some(&mut dh_b[..rows * in_dim])
        } else {
            None
        };
        net::linear_backward(
            input,
            rows,
            in_dim,
            model.tensor(info_w),
            width,
            &dh_a[..rows * width],
            dw,
            db,
            d_input,
        );
        core::mem::swap(dh_a, dh_b);
    }

    loss
}
