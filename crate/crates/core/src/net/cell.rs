//! Forward recurrences of the two coupled layers.

use super::params::{ClstmParams, LayerParams};
use crate::error::{ensure_len, Result};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one layer at one time step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// Concatenated input `[h_prev, g_prev, x_t]`.
    pub input: Vec<f64>,
    /// Activated gates: input, forget, candidate, output.
    pub gates: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One step of a coupled layer: gates read `[h_prev, g_prev, x]`.
pub(crate) fn layer_step(
    layer: &LayerParams,
    h_prev: &[f64],
    g_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
) -> StepCache {
    let hd = layer.hidden;
    let mut input = Vec::with_capacity(layer.input_cols());
    input.extend_from_slice(h_prev);
    input.extend_from_slice(g_prev);
    input.extend_from_slice(x);
    let mut gates = vec![0.0; 4 * hd];
    layer.w.affine(&input, &layer.b, &mut gates);
    for j in 0..hd {
        gates[j] = sigmoid(gates[j]);
        gates[hd + j] = sigmoid(gates[hd + j]);
        gates[2 * hd + j] = gates[2 * hd + j].tanh();
        gates[3 * hd + j] = sigmoid(gates[3 * hd + j]);
    }
    let mut c = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for j in 0..hd {
        c[j] = gates[j] * gates[2 * hd + j] + gates[hd + j] * c_prev[j];
        tanh_c[j] = c[j].tanh();
        h[j] = gates[3 * hd + j] * tanh_c[j];
    }
    StepCache {
        input,
        gates,
        c_prev: c_prev.to_vec(),
        tanh_c,
        c,
        h,
    }
}

fn check_step(layer: &LayerParams, h1: usize, h2: usize, c_prev: &[f64], x: &[f64]) -> Result<()> {
    ensure_len("cell state", layer.hidden, c_prev.len())?;
    ensure_len("step input", layer.input_cols() - h1 - h2, x.len())
}

/// Action layer step: returns `(h_t, C_t)`.
pub fn lstm_i_step(
    params: &ClstmParams,
    h_prev: &[f64],
    g_prev: &[f64],
    c_prev: &[f64],
    f_t: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("h_prev", params.h1(), h_prev.len())?;
    ensure_len("g_prev", params.h2(), g_prev.len())?;
    check_step(&params.layer_i, params.h1(), params.h2(), c_prev, f_t)?;
    let s = layer_step(&params.layer_i, h_prev, g_prev, c_prev, f_t);
    Ok((s.h, s.c))
}

/// Audience layer step: returns `(g_t, C^a_t)`.
pub fn lstm_a_step(
    params: &ClstmParams,
    h_prev: &[f64],
    g_prev: &[f64],
    c_prev: &[f64],
    a_t: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("h_prev", params.h1(), h_prev.len())?;
    ensure_len("g_prev", params.h2(), g_prev.len())?;
    check_step(&params.layer_a, params.h1(), params.h2(), c_prev, a_t)?;
    let s = layer_step(&params.layer_a, h_prev, g_prev, c_prev, a_t);
    Ok((s.h, s.c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::Coupling;

    #[test]
    fn zero_params_give_zero_state() {
        let p = ClstmParams::zeros(3, 2, 2, 2, Coupling::Full);
        let (h, c) = lstm_i_step(&p, &[0.3, -0.2], &[0.1, 0.9], &[0.0; 2], &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
        let (g, _) = lstm_a_step(&p, &[0.3, -0.2], &[0.1, 0.9], &[0.0; 2], &[0.4, 0.4]).unwrap();
        assert_eq!(g, vec![0.0; 2]);
    }

    #[test]
    fn carried_cell_state_decays_by_half() {
        // sigmoid(0) = 0.5 and tanh(0) = 0, so C_t = 0.5·C_prev and h_t = 0.5·tanh(C_t).
        let p = ClstmParams::zeros(1, 1, 1, 1, Coupling::Full);
        let (h, c) = lstm_i_step(&p, &[0.0], &[0.0], &[1.0], &[1.0]).unwrap();
        assert_eq!(c, vec![0.5]);
        assert!((h[0] - 0.231_058_578_630_004_9).abs() < 1e-12);
        let (g, ca) = lstm_a_step(&p, &[0.0], &[0.0], &[1.0], &[0.0]).unwrap();
        assert_eq!(ca, vec![0.5]);
        assert!((g[0] - 0.231_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn scalar_weight_on_input_matches_formula() {
        // Only W_c reads f_t with weight 2; gate biases stay zero.
        let mut p = ClstmParams::zeros(1, 1, 1, 1, Coupling::Full);
        p.layer_i.w.set(2, 2, 2.0);
        let f = 0.4;
        let (h, c) = lstm_i_step(&p, &[0.0], &[0.0], &[0.0], &[f]).unwrap();
        let cand = (2.0f64 * f).tanh();
        let want_c = 0.5 * cand;
        assert!((c[0] - want_c).abs() < 1e-15);
        assert!((h[0] - 0.5 * want_c.tanh()).abs() < 1e-15);
    }

    #[test]
    fn mirrored_layers_agree() {
        let mut p = ClstmParams::init(3, 3, 2, 2, Coupling::Full, 5);
        p.layer_a = p.layer_i.clone();
        let (h, g) = ([0.1, -0.4], [0.3, 0.2]);
        let c = [0.05, -0.1];
        let x = [0.2, 0.5, 0.3];
        assert_eq!(
            lstm_i_step(&p, &h, &g, &c, &x).unwrap(),
            lstm_a_step(&p, &h, &g, &c, &x).unwrap()
        );
    }

    #[test]
    fn shape_errors() {
        let p = ClstmParams::zeros(3, 2, 2, 2, Coupling::Full);
        assert!(lstm_i_step(&p, &[0.0; 2], &[0.0; 2], &[0.0; 2], &[0.0; 2]).is_err());
        assert!(lstm_a_step(&p, &[0.0; 3], &[0.0; 2], &[0.0; 2], &[0.0; 2]).is_err());
    }
}
