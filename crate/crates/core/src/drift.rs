//! Drift detection and incremental model updates.
//!
//! While the stream is scored, segments whose audience interaction is below
//! a threshold `T` are treated as provisionally normal: their action-layer
//! hidden states go to the incoming set `S_n` and their windows to the
//! retraining buffer. Once `S_n` holds `l_s` vectors, its mean cosine
//! similarity to the historical set `S_h` is compared with `τ_u`. A similar
//! set means no drift and the model is kept. A dissimilar set triggers a
//! warm-started retrain on the buffered windows, and the result is merged
//! into the live model. Either way `S_n` then joins `S_h`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{clstm_forward, train_from, ClstmParams, ModelConfig};
use crate::stream::SequenceWindow;

pub use crate::net::merge_models;

/// Settings of the dynamic updater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateConfig {
    /// Capacity `l_s` of the incoming hidden-state buffer.
    pub buffer_len: usize,
    /// Similarity at or below which the model is retrained.
    pub tau_u: f64,
    /// Fixed normal-labeling threshold; `None` uses the mean interaction
    /// level of the previous buffer cycle.
    pub level_threshold: Option<f64>,
    /// Weight of the retrained model in the merge.
    pub lambda: f64,
    pub update_epochs: usize,
    /// Cap on the historical set; excess vectors are reservoir sampled.
    pub history_cap: Option<usize>,
    /// Cap on buffered windows kept between retrains (oldest dropped first).
    pub pending_cap: usize,
    /// Leading interaction channels that carry comment counts.
    pub count_channels: usize,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            buffer_len: 300,
            tau_u: 0.4,
            level_threshold: None,
            lambda: 0.5,
            update_epochs: 100,
            history_cap: Some(10_000),
            pending_cap: 1200,
            count_channels: 9,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buffer_len < 1 {
            return Err(Error::Config("buffer_len must be at least 1".into()));
        }
        if !(self.tau_u > 0.0 && self.tau_u < 1.0) {
            return Err(Error::Config(format!("tau_u {} outside (0, 1)", self.tau_u)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.pending_cap < self.buffer_len {
            return Err(Error::Config(format!(
                "pending_cap {} is smaller than buffer_len {}",
                self.pending_cap, self.buffer_len
            )));
        }
        if self.history_cap == Some(0) {
            return Err(Error::Config("history_cap must be at least 1".into()));
        }
        if self.count_channels < 1 {
            return Err(Error::Config("count_channels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean cosine similarity over all cross pairs of `a` and `b`.
///
/// Computed as the dot product of the two sets' mean unit vectors, which is
/// the same quantity in linear time.
pub fn cos_set_sim(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let ua = mean_unit(a, "historical")?;
    let ub = mean_unit(b, "incoming")?;
    if ua.len() != ub.len() {
        return Err(Error::shape("hidden vector", ua.len(), ub.len()));
    }
    Ok(ua.iter().zip(&ub).map(|(x, y)| x * y).sum())
}

fn mean_unit(set: &[Vec<f64>], which: &str) -> Result<Vec<f64>> {
    let first = set
        .first()
        .ok_or_else(|| Error::Validation(format!("{which} hidden-state set is empty")))?;
    let mut acc = vec![0.0; first.len()];
    for v in set {
        if v.len() != acc.len() {
            return Err(Error::shape("hidden vector", acc.len(), v.len()));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::Validation(format!("{which} set contains a zero vector")));
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x / norm;
        }
    }
    let n = set.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// One completed buffer cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub cycle: usize,
    pub sim: f64,
    pub retrained: bool,
    pub wall_time_s: f64,
    pub buffer_size: usize,
}

/// Hidden-state sets and buffers carried along the stream.
#[derive(Debug, Clone)]
pub struct DriftState {
    /// Historical action-layer hidden states `S_h`.
    pub history: Vec<Vec<f64>>,
    /// Incoming hidden states `S_n` of the current cycle.
    pub incoming: Vec<Vec<f64>>,
    /// Provisionally normal windows awaiting a retrain; the last
    /// `incoming.len()` entries belong to the current cycle.
    pub pending: Vec<SequenceWindow>,
    /// Normal-labeling threshold `T` of the current cycle.
    pub threshold: f64,
    /// Vectors ever offered to the history, for reservoir sampling.
    history_seen: u64,
    level_sum: f64,
    level_count: usize,
    cycles: usize,
    rng: ChaCha8Rng,
}

impl DriftState {
    /// Starts from the hidden states of the training windows.
    ///
    /// The initial threshold is the mean interaction level of those windows'
    /// targets unless the config fixes one.
    pub fn from_training(
        params: &ClstmParams,
        windows: &[SequenceWindow],
        cfg: &UpdateConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut state = DriftState {
            history: Vec::new(),
            incoming: Vec::new(),
            pending: Vec::new(),
            threshold: cfg.level_threshold.unwrap_or(f64::INFINITY),
            history_seen: 0,
            level_sum: 0.0,
            level_count: 0,
            cycles: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xd21f_7000),
        };
        let mut levels = 0.0;
        for w in windows {
            let pred = clstm_forward(params, w)?;
            state.remember(pred.h, cfg.history_cap);
            levels += w.target.interaction.level(cfg.count_channels);
        }
        if state.history.is_empty() {
            return Err(Error::Validation("no training windows to seed the history".into()));
        }
        if cfg.level_threshold.is_none() {
            state.threshold = levels / windows.len() as f64;
        }
        Ok(state)
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    fn remember(&mut self, h: Vec<f64>, cap: Option<usize>) {
        self.history_seen += 1;
        match cap {
            Some(cap) if self.history.len() >= cap => {
                let j = self.rng.gen_range(0..self.history_seen);
                if (j as usize) < cap {
                    self.history[j as usize] = h;
                }
            }
            _ => self.history.push(h),
        }
    }

    /// Offers one scored window; returns true when the buffer is full.
    fn offer(&mut self, window: &SequenceWindow, h: &[f64], cfg: &UpdateConfig) -> bool {
        let level = window.target.interaction.level(cfg.count_channels);
        self.level_sum += level;
        self.level_count += 1;
        if self.incoming.len() < cfg.buffer_len && level < self.threshold {
            self.incoming.push(h.to_vec());
            self.pending.push(window.clone());
            if self.pending.len() > cfg.pending_cap {
                let excess = self.pending.len() - cfg.pending_cap;
                self.pending.drain(..excess);
            }
        }
        self.incoming.len() >= cfg.buffer_len
    }
}

/// Buffers the provisionally normal windows of `windows` until `S_n` is full.
///
/// Returns the number of windows consumed.
pub fn collect_normals(
    state: &mut DriftState,
    windows: &[SequenceWindow],
    params: &ClstmParams,
    cfg: &UpdateConfig,
) -> Result<usize> {
    for (i, w) in windows.iter().enumerate() {
        if state.incoming.len() >= cfg.buffer_len {
            return Ok(i);
        }
        let pred = clstm_forward(params, w)?;
        if state.offer(w, &pred.h, cfg) {
            return Ok(i + 1);
        }
    }
    Ok(windows.len())
}

/// Streams model updates alongside detection.
#[derive(Debug, Clone)]
pub struct DriftUpdater {
    pub state: DriftState,
    pub cfg: UpdateConfig,
    /// Training settings for retrains; `max_epoch` is replaced by `update_epochs`.
    pub model_cfg: ModelConfig,
}

impl DriftUpdater {
    pub fn new(state: DriftState, cfg: UpdateConfig, model_cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        model_cfg.validate()?;
        Ok(DriftUpdater {
            state,
            cfg,
            model_cfg,
        })
    }

    /// Records one window already run through the current model.
    ///
    /// When this fills the buffer the update cycle runs and its log is returned.
    pub fn observe(
        &mut self,
        params: &mut ClstmParams,
        window: &SequenceWindow,
        h: &[f64],
    ) -> Result<Option<UpdateLog>> {
        if self.state.offer(window, h, &self.cfg) {
            self.run_cycle(params).map(Some)
        } else {
            Ok(None)
        }
    }

    fn run_cycle(&mut self, params: &mut ClstmParams) -> Result<UpdateLog> {
        let start = Instant::now();
        let state = &mut self.state;
        let sim = cos_set_sim(&state.history, &state.incoming)?;
        if self.cfg.level_threshold.is_none() && state.level_count > 0 {
            state.threshold = state.level_sum / state.level_count as f64;
        }
        state.level_sum = 0.0;
        state.level_count = 0;

        let retrained = sim <= self.cfg.tau_u;
        if retrained {
            let mut mcfg = self.model_cfg.clone();
            mcfg.max_epoch = self.cfg.update_epochs;
            mcfg.checkpoint_every = mcfg.checkpoint_every.min(self.cfg.update_epochs.max(1));
            mcfg.seed = self.model_cfg.seed.wrapping_add(state.cycles as u64 + 1);
            let (fresh, _) = train_from(params.clone(), &state.pending, &mcfg)?;
            *params = merge_models(params, &fresh, self.cfg.lambda)?;
            state.pending.clear();
        }
        let buffer_size = state.incoming.len();
        for h in std::mem::take(&mut state.incoming) {
            state.remember(h, self.cfg.history_cap);
        }
        state.cycles += 1;
        Ok(UpdateLog {
            cycle: state.cycles,
            sim,
            retrained,
            wall_time_s: start.elapsed().as_secs_f64(),
            buffer_size,
        })
    }
}

/// Runs the update loop over `windows`, mutating `params` and the updater's state.
pub fn dynamic_update(
    params: &mut ClstmParams,
    updater: &mut DriftUpdater,
    windows: &[SequenceWindow],
) -> Result<Vec<UpdateLog>> {
    let mut logs = Vec::new();
    for w in windows {
        let pred = clstm_forward(params, w)?;
        if let Some(log) = updater.observe(params, w, &pred.h)? {
            logs.push(log);
        }
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{random_window, Coupling};

    fn brute(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let cos = |x: &[f64], y: &[f64]| {
            let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
            let ny = y.iter().map(|p| p * p).sum::<f64>().sqrt();
            dot / (nx * ny)
        };
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += cos(x, y);
            }
        }
        s / (a.len() * b.len()) as f64
    }

    #[test]
    fn similarity_trivial_cases() {
        let v = vec![vec![0.3, -1.2, 2.0]];
        assert!((cos_set_sim(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let e1 = vec![vec![1.0, 0.0]];
        let e2 = vec![vec![0.0, 1.0]];
        assert_eq!(cos_set_sim(&e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn similarity_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut set = |n| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            };
            let a = set(5);
            let b = set(5);
            assert!((cos_set_sim(&a, &b).unwrap() - brute(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_rejects_empty_and_zero() {
        let v = vec![vec![1.0, 2.0]];
        assert!(cos_set_sim(&[], &v).is_err());
        assert!(cos_set_sim(&v, &[vec![0.0, 0.0]]).is_err());
    }

    fn setup(n: usize) -> (ClstmParams, Vec<SequenceWindow>) {
        let params = ClstmParams::init(6, 4, 3, 3, Coupling::Full, 1);
        let windows = (0..n).map(|i| random_window(6, 4, 2, i as u64)).collect();
        (params, windows)
    }

    fn cfg(buffer_len: usize, threshold: f64) -> UpdateConfig {
        UpdateConfig {
            buffer_len,
            level_threshold: Some(threshold),
            pending_cap: buffer_len.max(1) * 4,
            count_channels: 3,
            update_epochs: 2,
            ..UpdateConfig::default()
        }
    }

    #[test]
    fn collect_nothing_above_threshold() {
        let (params, windows) = setup(10);
        let c = cfg(5, 0.0);
        let mut st = DriftState::from_training(&params, &windows[..3], &c, 0).unwrap();
        assert_eq!(collect_normals(&mut st, &windows, &params, &c).unwrap(), 10);
        assert!(st.incoming.is_empty() && st.pending.is_empty());
    }

    #[test]
    fn collect_everything_below_threshold_until_full() {
        let (params, windows) = setup(10);
        let c = cfg(4, 1.0 + 1e-9);
        let mut st = DriftState::from_training(&params, &windows[..3], &c, 0).unwrap();
        assert_eq!(collect_normals(&mut st, &windows, &params, &c).unwrap(), 4);
        assert_eq!(st.incoming.len(), 4);
        assert_eq!(st.pending.len(), 4);
    }

    #[test]
    fn collect_mixed_matches_direct_count() {
        let (params, windows) = setup(30);
        let c = cfg(100, 0.5);
        let expected = windows
            .iter()
            .filter(|w| w.target.interaction.level(3) < 0.5)
            .count();
        let mut st = DriftState::from_training(&params, &windows[..3], &c, 0).unwrap();
        collect_normals(&mut st, &windows, &params, &c).unwrap();
        assert_eq!(st.incoming.len(), expected);
    }

    #[test]
    fn buffer_longer_than_stream_never_updates() {
        let (mut params, windows) = setup(12);
        let before = params.clone();
        let c = cfg(50, 1.1);
        let st = DriftState::from_training(&params, &windows[..3], &c, 0).unwrap();
        let mut up = DriftUpdater::new(st, c, ModelConfig::default()).unwrap();
        let logs = dynamic_update(&mut params, &mut up, &windows).unwrap();
        assert!(logs.is_empty());
        assert_eq!(params, before);
        assert_eq!(up.state.history.len(), 3);
    }

    #[test]
    fn history_grows_by_buffer_per_cycle() {
        let (mut params, windows) = setup(12);
        let mut c = cfg(4, 1.1);
        c.tau_u = 0.01; // random windows stay similar; keep the model
        let st = DriftState::from_training(&params, &windows[..3], &c, 0).unwrap();
        let mcfg = ModelConfig {
            d1: 6,
            d2: 4,
            q: 2,
            h1: 3,
            h2: 3,
            ..ModelConfig::default()
        };
        let mut up = DriftUpdater::new(st, c, mcfg).unwrap();
        let logs = dynamic_update(&mut params, &mut up, &windows).unwrap();
        assert_eq!(logs.len(), 3);
        assert_eq!(up.state.history.len(), 3 + 12);
        assert!(up.state.incoming.is_empty());
        assert!(logs.iter().all(|l| l.buffer_size == 4));
    }

    #[test]
    fn history_is_capped_by_reservoir() {
        let (params, windows) = setup(20);
        let mut c = cfg(4, 1.1);
        c.history_cap = Some(7);
        let st = DriftState::from_training(&params, &windows, &c, 0).unwrap();
        assert_eq!(st.history.len(), 7);
        assert_eq!(st.history_seen, 20);
    }

    #[test]
    fn config_validation() {
        assert!(UpdateConfig::default().validate().is_ok());
        let bad = [
            UpdateConfig { buffer_len: 0, ..UpdateConfig::default() },
            UpdateConfig { tau_u: 1.0, ..UpdateConfig::default() },
            UpdateConfig { lambda: 1.5, ..UpdateConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
