//! Reconstruction-error anomaly scores and threshold decisions.

use serde::{Deserialize, Serialize};

use crate::divergence::{js_divergence, l2_distance};
use crate::error::{ensure_len, Error, Result};
use crate::net::{clstm_forward, ClstmParams, Prediction};
use crate::stream::{ActionFeature, SequenceWindow};

/// Score components of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub re_i: f64,
    pub re_a: f64,
    pub re_ia: f64,
    pub omega: f64,
}

impl ScoreBreakdown {
    pub fn new(re_i: f64, re_a: f64, omega: f64) -> Self {
        ScoreBreakdown {
            re_i,
            re_a,
            re_ia: re_ia(re_i, re_a, omega),
            omega,
        }
    }
}

/// Decision thresholds.
///
/// `tau` decides anomalies from the full score. The pruning detector uses
/// `t_a` as its anomaly threshold and `t_n` as its normal threshold; it makes
/// the same decisions as exhaustive scoring when `t_a == tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub tau: f64,
    pub t_a: f64,
    pub t_n: f64,
}

/// Ratio between the normal and the anomaly threshold.
pub const NORMAL_RATIO: f64 = 0.7;

impl ThresholdConfig {
    /// `t_a = tau`, `t_n = 0.7·t_a`.
    pub fn from_tau(tau: f64) -> Self {
        ThresholdConfig {
            tau,
            t_a: tau,
            t_n: NORMAL_RATIO * tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.t_a.is_finite() && self.t_n.is_finite()) {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if !(0.0 < self.t_n && self.t_n < self.t_a) {
            return Err(Error::Config(format!(
                "thresholds need 0 < t_n < t_a (t_n = {}, t_a = {})",
                self.t_n, self.t_a
            )));
        }
        Ok(())
    }
}

/// Jensen–Shannon reconstruction error of the action feature, in nats.
pub fn re_i(f: &ActionFeature, fhat: &ActionFeature) -> Result<f64> {
    ensure_len("reconstructed action", f.len(), fhat.len())?;
    Ok(js_divergence(f.as_slice(), fhat.as_slice()))
}

/// Euclidean reconstruction error of the interaction feature.
pub fn re_a(a: &[f64], ahat: &[f64]) -> Result<f64> {
    ensure_len("reconstructed interaction", a.len(), ahat.len())?;
    Ok(l2_distance(a, ahat))
}

/// `ω·re_i + (1-ω)·re_a`.
#[inline]
pub fn re_ia(re_i: f64, re_a: f64, omega: f64) -> f64 {
    omega * re_i + (1.0 - omega) * re_a
}

/// Scores the target of `window` against the model's reconstruction.
pub fn score_prediction(
    window: &SequenceWindow,
    pred: &Prediction,
    omega: f64,
) -> Result<ScoreBreakdown> {
    let ri = re_i(&window.target.action, &pred.action)?;
    let ra = re_a(window.target.interaction.as_slice(), &pred.interaction)?;
    Ok(ScoreBreakdown::new(ri, ra, omega))
}

pub fn score_window(
    params: &ClstmParams,
    window: &SequenceWindow,
    omega: f64,
) -> Result<ScoreBreakdown> {
    let pred = clstm_forward(params, window)?;
    score_prediction(window, &pred, omega)
}

/// Exhaustive scoring of every window.
pub fn score_all(
    params: &ClstmParams,
    windows: &[SequenceWindow],
    omega: f64,
) -> Result<Vec<ScoreBreakdown>> {
    windows.iter().map(|w| score_window(params, w, omega)).collect()
}

/// Anomaly labels and an optional top-`k` list of segment ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub labels: Vec<bool>,
    pub top: Vec<u64>,
}

/// Labels segments with `re_ia > tau` and ranks them by descending score.
///
/// Ties are broken in favour of the earlier segment id.
pub fn classify_and_rank(
    scores: &[(u64, ScoreBreakdown)],
    tau: f64,
    top_k: Option<usize>,
) -> Ranking {
    let labels = scores.iter().map(|(_, s)| s.re_ia > tau).collect();
    let top = match top_k {
        None => Vec::new(),
        Some(k) => {
            let mut order: Vec<&(u64, ScoreBreakdown)> = scores.iter().collect();
            order.sort_by(|a, b| b.1.re_ia.total_cmp(&a.1.re_ia).then(a.0.cmp(&b.0)));
            order.into_iter().take(k).map(|(id, _)| *id).collect()
        }
    };
    Ranking { labels, top }
}

/// Picks the threshold maximizing Youden's J (`TPR - FPR`) on labeled scores.
///
/// The returned value sits midway between two consecutive distinct scores,
/// so no calibration score lies exactly on it.
pub fn calibrate_tau(scores: &[f64], labels: &[bool]) -> Result<f64> {
    ensure_len("calibration labels", scores.len(), labels.len())?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation(
            "threshold calibration needs both normal and anomalous segments".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Threshold just below `s`: everything scored >= s is flagged.
        let lower = if i < order.len() { scores[order[i]] } else { s - 1.0 };
        let j = tp as f64 / pos as f64 - fp as f64 / neg as f64;
        if j > best.0 {
            best = (j, 0.5 * (s + lower));
        }
    }
    Ok(best.1.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sb(x: f64) -> ScoreBreakdown {
        ScoreBreakdown::new(x, x, 0.5)
    }

    #[test]
    fn combination_examples() {
        assert!((re_ia(0.5, 0.25, 0.8) - 0.45).abs() < 1e-12);
        assert_eq!(re_ia(0.3, 0.9, 1.0), 0.3);
        assert_eq!(re_ia(0.3, 0.9, 0.0), 0.9);
    }

    #[test]
    fn re_a_examples() {
        assert_eq!(re_a(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(re_a(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(re_a(&[0.0], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn re_i_symmetric_and_bounded() {
        let f = ActionFeature::new(vec![0.7, 0.2, 0.1]).unwrap();
        let g = ActionFeature::new(vec![0.1, 0.1, 0.8]).unwrap();
        let a = re_i(&f, &g).unwrap();
        let b = re_i(&g, &f).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((0.0..=std::f64::consts::LN_2).contains(&a));
    }

    #[test]
    fn classify_examples() {
        let s = [(0, sb(0.1)), (1, sb(0.9)), (2, sb(0.5))];
        let r = classify_and_rank(&s, 0.4, Some(1));
        assert_eq!(r.labels, vec![false, true, true]);
        assert_eq!(r.top, vec![1]);
        let tie = [(4, sb(0.5)), (3, sb(0.5))];
        assert_eq!(classify_and_rank(&tie, 0.4, Some(1)).top, vec![3]);
    }

    #[test]
    fn raising_tau_never_adds_anomalies() {
        let s: Vec<_> = (0..50).map(|i| (i, sb(((i * 37) % 50) as f64 / 50.0))).collect();
        let mut prev = usize::MAX;
        for t in 0..20 {
            let n = classify_and_rank(&s, t as f64 / 20.0, None)
                .labels
                .iter()
                .filter(|&&x| x)
                .count();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn youden_threshold_separates_clean_data() {
        let scores = [0.1, 0.2, 0.15, 0.8, 0.9];
        let labels = [false, false, false, true, true];
        let t = calibrate_tau(&scores, &labels).unwrap();
        assert!(t > 0.2 && t < 0.8);
        assert!(calibrate_tau(&scores, &[false; 5]).is_err());
    }

    #[test]
    fn thresholds_default_ratio() {
        let t = ThresholdConfig::from_tau(0.2);
        assert_eq!(t.t_a, 0.2);
        assert!((t.t_n - 0.14).abs() < 1e-15);
        t.validate().unwrap();
        assert!(ThresholdConfig { tau: 0.2, t_a: 0.2, t_n: 0.3 }.validate().is_err());
    }
}
