use super::cell::{layer_step, StepCache};
use super::params::ClstmParams;
use crate::divergence::softmax;
use crate::error::{ensure_len, Error, Result};
use crate::stream::{ActionFeature, SequenceWindow};

/// Model output for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Reconstructed action feature, on the simplex.
    pub action: ActionFeature,
    /// Reconstructed interaction feature.
    pub interaction: Vec<f64>,
    /// Final hidden state of the action layer.
    pub h: Vec<f64>,
    /// Final hidden state of the audience layer.
    pub g: Vec<f64>,
}

pub(crate) struct Trace {
    pub steps_i: Vec<StepCache>,
    pub steps_a: Vec<StepCache>,
    pub probs: Vec<f64>,
    pub ahat: Vec<f64>,
}

impl Trace {
    pub fn h_final(&self) -> &[f64] {
        &self.steps_i.last().expect("non-empty trace").h
    }

    pub fn g_final(&self) -> &[f64] {
        &self.steps_a.last().expect("non-empty trace").h
    }
}

/// Unrolls both layers in lockstep from zero state and decodes the last states.
pub(crate) fn trace<A, B>(params: &ClstmParams, actions: &[A], interactions: &[B]) -> Trace
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    let (h1, h2) = (params.h1(), params.h2());
    let q = actions.len();
    let mut steps_i: Vec<StepCache> = Vec::with_capacity(q);
    let mut steps_a: Vec<StepCache> = Vec::with_capacity(q);
    let zeros_h = vec![0.0; h1];
    let zeros_g = vec![0.0; h2];
    for t in 0..q {
        let (h_prev, c_i, g_prev, c_a) = if t == 0 {
            (&zeros_h[..], &zeros_h[..], &zeros_g[..], &zeros_g[..])
        } else {
            let (si, sa) = (&steps_i[t - 1], &steps_a[t - 1]);
            (&si.h[..], &si.c[..], &sa.h[..], &sa.c[..])
        };
        let si = layer_step(&params.layer_i, h_prev, g_prev, c_i, actions[t].as_ref());
        let sa = layer_step(&params.layer_a, h_prev, g_prev, c_a, interactions[t].as_ref());
        steps_i.push(si);
        steps_a.push(sa);
    }
    let h = &steps_i[q - 1].h;
    let g = &steps_a[q - 1].h;
    let mut logits = vec![0.0; params.d1()];
    params.decoder_i.w.affine(h, &params.decoder_i.b, &mut logits);
    let mut probs = vec![0.0; params.d1()];
    softmax(&logits, &mut probs);
    let mut ahat = vec![0.0; params.d2()];
    params.decoder_a.w.affine(g, &params.decoder_a.b, &mut ahat);
    Trace {
        steps_i,
        steps_a,
        probs,
        ahat,
    }
}

pub(crate) fn check_window(params: &ClstmParams, window: &SequenceWindow) -> Result<()> {
    if window.actions.is_empty() {
        return Err(Error::Validation("window has no steps".into()));
    }
    ensure_len("window interactions", window.actions.len(), window.interactions.len())?;
    for a in window.actions.iter().chain(std::iter::once(&window.target.action)) {
        ensure_len("action feature", params.d1(), a.len())?;
    }
    for a in window
        .interactions
        .iter()
        .chain(std::iter::once(&window.target.interaction))
    {
        ensure_len("interaction feature", params.d2(), a.len())?;
    }
    Ok(())
}

/// Runs the coupled model over a window and decodes its final states.
///
/// The action reconstruction is the softmax of the action decoder's output,
/// so it always lies on the simplex.
pub fn clstm_forward(params: &ClstmParams, window: &SequenceWindow) -> Result<Prediction> {
    check_window(params, window)?;
    let actions: Vec<&[f64]> = window.actions.iter().map(|a| a.as_slice()).collect();
    let inters: Vec<&[f64]> = window.interactions.iter().map(|a| a.as_slice()).collect();
    let tr = trace(params, &actions, &inters);
    Ok(Prediction {
        h: tr.h_final().to_vec(),
        g: tr.g_final().to_vec(),
        action: ActionFeature::from_trusted(tr.probs),
        interaction: tr.ahat,
    })
}
