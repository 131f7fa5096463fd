//! End-to-end workflows shared by the command-line tool and the tests:
//! fitting and calibrating a model, batch detection, and online detection
//! with dynamic updating.

use serde::Serialize;

use crate::checkpoint::{Calibration, ModelCheckpoint};
use crate::config::RunConfig;
use crate::drift::{DriftState, DriftUpdater, UpdateLog};
use crate::error::{Error, Result};
use crate::filter::{calibrate_trigger, AdosConfig, AdosDetector, FilterDecision};
use crate::io::ScoreRow;
use crate::net::{clstm_forward, train, ClstmParams, ModelConfig, TrainReport};
use crate::scoring::{calibrate_tau, score_all, score_prediction, ThresholdConfig};
use crate::stream::{build_sequences, Label, SegmentRecord, SequenceWindow};

/// A trained and calibrated model.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub params: ClstmParams,
    pub report: TrainReport,
    pub calibration: Calibration,
}

impl Fitted {
    pub fn checkpoint(&self, cfg: &ModelConfig) -> ModelCheckpoint {
        let mut ck = ModelCheckpoint::new(cfg, &self.params, self.report.selected_epoch);
        ck.calibration = Some(self.calibration);
        ck
    }
}

fn is_anomaly(w: &SequenceWindow) -> bool {
    w.target.label.is_some_and(Label::is_anomaly)
}

/// Trains on the non-anomalous windows of `segments` and calibrates thresholds.
///
/// The last quarter of the windows, anomalies included, serves as the
/// calibration slice: `tau` maximizes Youden's J there unless the config
/// fixes it, and the trigger window is fitted on the same slice.
pub fn fit(cfg: &RunConfig, segments: &[SegmentRecord]) -> Result<Fitted> {
    cfg.validate()?;
    let windows = build_sequences(segments, cfg.model.q)?;
    let normal: Vec<SequenceWindow> = windows.iter().filter(|w| !is_anomaly(w)).cloned().collect();
    let (params, report) = train(&normal, &cfg.model)?;

    let calib = &windows[windows.len() * 3 / 4..];
    let tau = match cfg.scoring.tau {
        Some(t) => t,
        None => {
            let scores: Vec<f64> = score_all(&params, calib, cfg.model.omega)?
                .iter()
                .map(|s| s.re_ia)
                .collect();
            let labels: Vec<bool> = calib.iter().map(is_anomaly).collect();
            calibrate_tau(&scores, &labels)?
        }
    };
    let thresholds = cfg.scoring.thresholds(Some(tau))?;
    let (t1, t2) = calibrate_trigger(
        calib,
        &params,
        cfg.model.omega,
        &thresholds,
        cfg.ados.strict_paper_mode,
    )?;
    Ok(Fitted {
        params,
        report,
        calibration: Calibration { tau, t1, t2 },
    })
}

/// Resolves detection settings from the config and a checkpoint's calibration.
///
/// Values set explicitly in the config win over calibrated ones.
pub fn resolve(cfg: &RunConfig, calibration: Option<&Calibration>) -> Result<(ThresholdConfig, AdosConfig)> {
    let thresholds = cfg.scoring.thresholds(calibration.map(|c| c.tau))?;
    let mut ados = cfg.ados.clone();
    let defaults = AdosConfig::default();
    if let Some(c) = calibration {
        if ados.t1 == defaults.t1 && ados.t2 == defaults.t2 {
            ados.t1 = c.t1;
            ados.t2 = c.t2;
        }
    }
    Ok((thresholds, ados))
}

/// Scores every window exhaustively.
pub fn detect_exhaustive(
    params: &ClstmParams,
    windows: &[SequenceWindow],
    omega: f64,
    thresholds: &ThresholdConfig,
) -> Result<Vec<ScoreRow>> {
    windows
        .iter()
        .map(|w| {
            let pred = clstm_forward(params, w)?;
            Ok(exhaustive_row(w, &score_prediction(w, &pred, omega)?, thresholds))
        })
        .collect()
}

fn exhaustive_row(w: &SequenceWindow, s: &crate::scoring::ScoreBreakdown, t: &ThresholdConfig) -> ScoreRow {
    ScoreRow {
        id: w.target.id,
        re_i: Some(s.re_i),
        re_a: s.re_a,
        re_ia: Some(s.re_ia),
        label: w.target.label,
        anomaly: s.re_ia > t.tau,
        path: None,
    }
}

/// Scores every window with bound pruning; also returns the decisions.
pub fn detect_ados(
    params: &ClstmParams,
    windows: &[SequenceWindow],
    omega: f64,
    thresholds: &ThresholdConfig,
    ados: &AdosConfig,
) -> Result<(Vec<ScoreRow>, Vec<FilterDecision>)> {
    let det = AdosDetector::new(ados.clone(), *thresholds, omega)?;
    let mut rows = Vec::with_capacity(windows.len());
    let mut decisions = Vec::with_capacity(windows.len());
    for w in windows {
        let (r, d) = det.detect(params, w)?;
        rows.push(ScoreRow {
            id: r.id,
            re_i: r.re_i,
            re_a: r.re_a,
            re_ia: r.re_ia,
            label: r.label,
            anomaly: r.anomaly,
            path: Some(d.path),
        });
        decisions.push(d);
    }
    Ok((rows, decisions))
}

/// Output of an online run.
#[derive(Debug, Clone, Serialize)]
pub struct StreamOutcome {
    #[serde(skip)]
    pub rows: Vec<ScoreRow>,
    pub updates: Vec<UpdateLog>,
}

/// Scores windows in order, updating the model as drift is detected.
///
/// With `updater == None` this is exactly [`detect_exhaustive`] (or
/// [`detect_ados`] when `ados` is given).
pub fn run_stream(
    params: &mut ClstmParams,
    windows: &[SequenceWindow],
    omega: f64,
    thresholds: &ThresholdConfig,
    ados: Option<&AdosConfig>,
    mut updater: Option<&mut DriftUpdater>,
) -> Result<StreamOutcome> {
    let det = ados
        .map(|a| AdosDetector::new(a.clone(), *thresholds, omega))
        .transpose()?;
    let mut rows = Vec::with_capacity(windows.len());
    let mut updates = Vec::new();
    for w in windows {
        let pred = clstm_forward(params, w)?;
        let row = match &det {
            Some(det) => {
                let (r, d) = det.decide(w, &pred)?;
                ScoreRow {
                    id: r.id,
                    re_i: r.re_i,
                    re_a: r.re_a,
                    re_ia: r.re_ia,
                    label: r.label,
                    anomaly: r.anomaly,
                    path: Some(d.path),
                }
            }
            None => exhaustive_row(w, &score_prediction(w, &pred, omega)?, thresholds),
        };
        rows.push(row);
        if let Some(up) = updater.as_deref_mut() {
            if let Some(log) = up.observe(params, w, &pred.h)? {
                updates.push(log);
            }
        }
    }
    Ok(StreamOutcome { rows, updates })
}

/// Builds a drift updater seeded with the hidden states of `history`.
pub fn drift_updater(
    cfg: &RunConfig,
    params: &ClstmParams,
    history: &[SequenceWindow],
) -> Result<DriftUpdater> {
    let normal: Vec<SequenceWindow> = history.iter().filter(|w| !is_anomaly(w)).cloned().collect();
    if normal.is_empty() {
        return Err(Error::Validation("no normal history windows to seed drift detection".into()));
    }
    let state = DriftState::from_training(params, &normal, &cfg.update, cfg.seed)?;
    DriftUpdater::new(state, cfg.update.clone(), cfg.model.clone())
}

/// Ids flagged as anomalous, in stream order.
pub fn anomaly_ids(rows: &[ScoreRow]) -> Vec<u64> {
    rows.iter().filter(|r| r.anomaly).map(|r| r.id).collect()
}
