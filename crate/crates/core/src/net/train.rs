use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::{accumulate_window, batch_loss};
use super::forward::check_window;
use super::loss::LossKind;
use super::params::{ClstmParams, Coupling};
use crate::error::{Error, Result};
use crate::stream::SequenceWindow;

/// Shapes and optimisation settings of the coupled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d1: usize,
    pub d2: usize,
    pub q: usize,
    pub h1: usize,
    pub h2: usize,
    /// Weight of the action term in both the loss and the anomaly score.
    pub omega: f64,
    pub lr: f64,
    pub max_epoch: usize,
    pub checkpoint_every: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub coupling: Coupling,
    /// Mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d1: 40,
            d2: 11,
            q: 9,
            h1: 16,
            h2: 16,
            omega: 0.8,
            lr: 0.001,
            max_epoch: 1000,
            checkpoint_every: 50,
            seed: 0,
            loss: LossKind::Js,
            coupling: Coupling::Full,
            batch_size: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h1 < 1 || self.h2 < 1 {
            return Err(Error::Validation("hidden sizes must be at least 1".into()));
        }
        if self.d1 < 2 || self.d2 < 1 {
            return Err(Error::Validation("feature dimensions too small".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Validation(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Validation(format!("omega {} outside [0, 1]", self.omega)));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::Validation("checkpoint_every must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Validation("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn init_params(&self) -> ClstmParams {
        ClstmParams::init(self.d1, self.d2, self.h1, self.h2, self.coupling, self.seed)
    }
}

/// Loss of the parameters saved at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss at the start of each epoch; entry 0 is the initial model.
    pub train_loss: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Epoch of the returned parameters: the checkpoint with lowest validation loss.
    pub selected_epoch: usize,
}

impl TrainReport {
    pub fn selected(&self) -> &Checkpoint {
        self.checkpoints
            .iter()
            .find(|c| c.epoch == self.selected_epoch)
            .expect("selected checkpoint is recorded")
    }
}

/// Splits chronologically: first 75% for training, the rest for validation.
pub fn split_train_val(dataset: &[SequenceWindow]) -> (&[SequenceWindow], &[SequenceWindow]) {
    if dataset.len() < 2 {
        return (dataset, dataset);
    }
    let cut = ((dataset.len() * 3) / 4).clamp(1, dataset.len() - 1);
    dataset.split_at(cut)
}

/// Trains from a fresh seeded initialization.
pub fn train(dataset: &[SequenceWindow], cfg: &ModelConfig) -> Result<(ClstmParams, TrainReport)> {
    train_from(cfg.init_params(), dataset, cfg)
}

/// Trains starting from `init`, keeping the best validation checkpoint.
pub fn train_from(
    init: ClstmParams,
    dataset: &[SequenceWindow],
    cfg: &ModelConfig,
) -> Result<(ClstmParams, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("training dataset is empty".into()));
    }
    for w in dataset {
        check_window(&init, w)?;
    }
    let (train_set, val_set) = split_train_val(dataset);
    let mut params = init;
    let mut opt = AdamState::for_params(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch = cfg.batch_size.unwrap_or(train_set.len()).min(train_set.len());

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.max_epoch + 1),
        checkpoints: Vec::new(),
        selected_epoch: 0,
    };
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut checkpoint = |epoch: usize, params: &ClstmParams, train_loss: f64, report: &mut TrainReport| -> Result<()> {
        let val_loss = batch_loss(params, val_set, cfg.omega, cfg.loss)?;
        report.checkpoints.push(Checkpoint {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            report.selected_epoch = epoch;
        }
        Ok(())
    };

    for epoch in 0..=cfg.max_epoch {
        let is_checkpoint = epoch % cfg.checkpoint_every == 0 || epoch == cfg.max_epoch;
        if epoch == cfg.max_epoch || cfg.batch_size.is_some() {
            // The loss at the current parameters is not a by-product of a step here.
            let l = batch_loss(&params, train_set, cfg.omega, cfg.loss)?;
            report.train_loss.push(l);
            if is_checkpoint {
                checkpoint(epoch, &params, l, &mut report)?;
            }
            if epoch == cfg.max_epoch {
                break;
            }
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let mut grads = params.zeros_like();
                for &i in chunk {
                    accumulate_window(&params, &train_set[i], cfg.omega, cfg.loss, &mut grads);
                }
                grads.scale(1.0 / chunk.len() as f64);
                grads.apply_coupling_mask();
                adam_step(&mut params, &grads, &mut opt, cfg.lr);
            }
        } else {
            let mut grads = params.zeros_like();
            let mut total = 0.0;
            for w in train_set {
                total += accumulate_window(&params, w, cfg.omega, cfg.loss, &mut grads);
            }
            let l = total / train_set.len() as f64;
            report.train_loss.push(l);
            if is_checkpoint {
                checkpoint(epoch, &params, l, &mut report)?;
            }
            grads.scale(1.0 / train_set.len() as f64);
            grads.apply_coupling_mask();
            adam_step(&mut params, &grads, &mut opt, cfg.lr);
        }
        if !params.is_finite() {
            return Err(Error::Invariant(format!("parameters diverged at epoch {epoch}")));
        }
    }
    Ok((best, report))
}
