//! The coupled two-layer recurrent model.
//!
//! The action layer and the audience layer advance in lockstep. At every
//! step each layer's gates read the concatenation `[h_{t-1}, g_{t-1}, x_t]`,
//! where `h` is the action layer's hidden state, `g` the audience layer's,
//! and `x_t` the layer's own input feature. After `q` steps the final `h` is
//! decoded into a predicted action distribution and the final `g` into a
//! predicted interaction feature.

mod adam;
mod backward;
mod cell;
mod forward;
mod loss;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{batch_loss, grad, grad_with};
pub use cell::{lstm_a_step, lstm_i_step};
pub use forward::{clstm_forward, Prediction};
pub use loss::{loss, loss_with, LossKind};
pub use params::{merge_models, Affine, ClstmParams, Coupling, LayerParams, Matrix};
pub use train::{split_train_val, train, train_from, Checkpoint, ModelConfig, TrainReport};

#[cfg(test)]
pub(crate) fn random_window(
    d1: usize,
    d2: usize,
    q: usize,
    seed: u64,
) -> crate::stream::SequenceWindow {
    use crate::stream::{ActionFeature, InteractionFeature, SegmentRecord, SequenceWindow};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let simplex = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..d1).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        ActionFeature::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    };
    let actions = (0..q).map(|_| simplex(&mut rng)).collect();
    let interactions = (0..q)
        .map(|_| InteractionFeature::new((0..d2).map(|_| rng.gen()).collect()).unwrap())
        .collect();
    let target = SegmentRecord {
        id: q as u64,
        action: simplex(&mut rng),
        interaction: InteractionFeature::new((0..d2).map(|_| rng.gen()).collect()).unwrap(),
        label: None,
    };
    SequenceWindow {
        actions,
        interactions,
        target,
    }
}
