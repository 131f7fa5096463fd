use serde::{Deserialize, Serialize};

use super::params::ClstmParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn for_params(params: &ClstmParams) -> Self {
        Self::new(params.num_params())
    }
}

/// Applies one bias-corrected Adam update to a flat slice.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, offset: usize) {
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[offset + i];
        let v = &mut state.v[offset + i];
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= lr * mhat / (vhat.sqrt() + EPSILON);
    }
}

/// One Adam step over every parameter tensor.
pub fn adam_step(params: &mut ClstmParams, grads: &ClstmParams, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let mut offset = 0;
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        let len = p.len();
        adam_update(p, g, state, lr, offset);
        offset += len;
    }
}
