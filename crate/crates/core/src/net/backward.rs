//! Exact gradients by backpropagation through time.
//!
//! Both layers are unrolled together, so the gradient reaching `h_{t-1}` is
//! the sum of what flows back through the action layer's own recurrence and
//! through the audience layer's gates (and symmetrically for `g_{t-1}`).

use super::cell::StepCache;
use super::forward::{check_window, trace};
use super::loss::{action_loss, action_loss_grad, LossKind};
use super::params::{ClstmParams, LayerParams};
use crate::divergence::mse;
use crate::error::{Error, Result};
use crate::stream::SequenceWindow;

/// Backward through one layer step. Returns `(∂/∂input, ∂/∂C_prev)`.
fn layer_backward(
    layer: &LayerParams,
    cache: &StepCache,
    dh: &[f64],
    dc_next: &[f64],
    grad: &mut LayerParams,
    need_input: bool,
) -> (Vec<f64>, Vec<f64>) {
    let hd = layer.hidden;
    let g = &cache.gates;
    let mut dpre = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for j in 0..hd {
        let (ig, fg, cand, og) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
        let tc = cache.tanh_c[j];
        let dout = dh[j] * tc;
        let dc = dc_next[j] + dh[j] * og * (1.0 - tc * tc);
        dc_prev[j] = dc * fg;
        dpre[j] = dc * cand * ig * (1.0 - ig);
        dpre[hd + j] = dc * cache.c_prev[j] * fg * (1.0 - fg);
        dpre[2 * hd + j] = dc * ig * (1.0 - cand * cand);
        dpre[3 * hd + j] = dout * og * (1.0 - og);
    }
    grad.w.add_outer(&dpre, &cache.input);
    for (b, d) in grad.b.iter_mut().zip(&dpre) {
        *b += d;
    }
    let mut dx = Vec::new();
    if need_input {
        dx = vec![0.0; layer.input_cols()];
        layer.w.add_transposed_product(&dpre, &mut dx);
    }
    (dx, dc_prev)
}

/// Accumulates the gradient of one window's loss into `grads`; returns the loss.
pub(crate) fn accumulate_window(
    params: &ClstmParams,
    window: &SequenceWindow,
    omega: f64,
    kind: LossKind,
    grads: &mut ClstmParams,
) -> f64 {
    let actions: Vec<&[f64]> = window.actions.iter().map(|a| a.as_slice()).collect();
    let inters: Vec<&[f64]> = window.interactions.iter().map(|a| a.as_slice()).collect();
    let tr = trace(params, &actions, &inters);
    let f = window.target.action.as_slice();
    let a = window.target.interaction.as_slice();
    let (h1, h2) = (params.h1(), params.h2());
    let d2 = params.d2() as f64;

    let loss = omega * action_loss(kind, &tr.probs, f) + (1.0 - omega) * mse(&tr.ahat, a);

    let mut gp = vec![0.0; params.d1()];
    action_loss_grad(kind, &tr.probs, f, &mut gp);
    let dot: f64 = tr.probs.iter().zip(&gp).map(|(p, g)| p * g).sum();
    let dz: Vec<f64> = tr
        .probs
        .iter()
        .zip(&gp)
        .map(|(p, g)| omega * p * (g - dot))
        .collect();
    let da: Vec<f64> = tr
        .ahat
        .iter()
        .zip(a)
        .map(|(x, y)| (1.0 - omega) * 2.0 * (x - y) / d2)
        .collect();

    grads.decoder_i.w.add_outer(&dz, tr.h_final());
    grads.decoder_a.w.add_outer(&da, tr.g_final());
    for (b, d) in grads.decoder_i.b.iter_mut().zip(&dz) {
        *b += d;
    }
    for (b, d) in grads.decoder_a.b.iter_mut().zip(&da) {
        *b += d;
    }

    let mut dh = vec![0.0; h1];
    let mut dg = vec![0.0; h2];
    params.decoder_i.w.add_transposed_product(&dz, &mut dh);
    params.decoder_a.w.add_transposed_product(&da, &mut dg);
    let mut dc_i = vec![0.0; h1];
    let mut dc_a = vec![0.0; h2];
    for t in (0..tr.steps_i.len()).rev() {
        let need = t > 0;
        let (dxi, ci) =
            layer_backward(&params.layer_i, &tr.steps_i[t], &dh, &dc_i, &mut grads.layer_i, need);
        let (dxa, ca) =
            layer_backward(&params.layer_a, &tr.steps_a[t], &dg, &dc_a, &mut grads.layer_a, need);
        dc_i = ci;
        dc_a = ca;
        if need {
            for j in 0..h1 {
                dh[j] = dxi[j] + dxa[j];
            }
            for j in 0..h2 {
                dg[j] = dxi[h1 + j] + dxa[h1 + j];
            }
        }
    }
    loss
}

/// Mean loss over `batch` and its exact gradient.
pub fn grad(
    params: &ClstmParams,
    batch: &[SequenceWindow],
    omega: f64,
) -> Result<(f64, ClstmParams)> {
    grad_with(params, batch, omega, LossKind::Js)
}

pub fn grad_with(
    params: &ClstmParams,
    batch: &[SequenceWindow],
    omega: f64,
    kind: LossKind,
) -> Result<(f64, ClstmParams)> {
    if batch.is_empty() {
        return Err(Error::Validation("gradient of an empty batch".into()));
    }
    for w in batch {
        check_window(params, w)?;
    }
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for w in batch {
        total += accumulate_window(params, w, omega, kind, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    grads.apply_coupling_mask();
    Ok((total / n, grads))
}

/// Mean loss over `batch` without gradients.
pub fn batch_loss(
    params: &ClstmParams,
    batch: &[SequenceWindow],
    omega: f64,
    kind: LossKind,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Validation("loss of an empty batch".into()));
    }
    let mut total = 0.0;
    for w in batch {
        check_window(params, w)?;
        let actions: Vec<&[f64]> = w.actions.iter().map(|a| a.as_slice()).collect();
        let inters: Vec<&[f64]> = w.interactions.iter().map(|a| a.as_slice()).collect();
        let tr = trace(params, &actions, &inters);
        total += omega * action_loss(kind, &tr.probs, w.target.action.as_slice())
            + (1.0 - omega) * mse(&tr.ahat, w.target.interaction.as_slice());
    }
    Ok(total / batch.len() as f64)
}
