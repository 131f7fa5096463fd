//! Bound-pruned detection loop.
//!
//! For each segment the detector first looks at the trigger value `tF`. When
//! it lies in `[T1, T2]` the L1 sandwich is tried; a segment whose upper bound
//! already clears the normal threshold, or whose lower bound already exceeds
//! the anomaly threshold, is decided without computing the divergence.
//! Otherwise the dimension-group bound is tried for the normal side, and only
//! the remaining segments pay for the exact divergence.

use serde::{Deserialize, Serialize};

use super::bounds::{js_l1_bounds, re_i_group_bound, re_i_with_partial, sparse_partial, t_func, BoundVariant};
use super::partition::{DimensionPartition, DEFAULT_GROUPS};
use super::sketch::{adg_sketch, adg_sketch_aligned};
use crate::error::{Error, Result};
use crate::net::{clstm_forward, ClstmParams, Prediction};
use crate::scoring::{re_a, ThresholdConfig};
use crate::stream::{Label, SequenceWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdosConfig {
    /// Lower trigger threshold on `tF`. A window with `t1 > t2` is empty and
    /// switches the L1 stage off.
    pub t1: f64,
    /// Upper trigger threshold on `tF`.
    pub t2: f64,
    pub bound_variant: BoundVariant,
    /// Compare bounds on the action error alone instead of the combined score.
    pub strict_paper_mode: bool,
    /// Number of value groups in the dimension partition.
    pub groups: usize,
    /// Number of sparsest groups kept exactly.
    pub sparse_groups: usize,
}

impl Default for AdosConfig {
    fn default() -> Self {
        AdosConfig {
            t1: 0.0,
            t2: 1.0,
            bound_variant: BoundVariant::default(),
            strict_paper_mode: false,
            groups: DEFAULT_GROUPS,
            sparse_groups: 10,
        }
    }
}

impl AdosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1.is_finite() && self.t2.is_finite()) {
            return Err(Error::Config("trigger thresholds must be finite".into()));
        }
        DimensionPartition::new(self.groups).map(|_| ())
    }
}

/// How a segment's decision was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPath {
    /// L1 upper bound cleared the normal threshold.
    L1Normal,
    /// L1 lower bound exceeded the anomaly threshold.
    L1Anomaly,
    /// Dimension-group upper bound cleared the normal threshold.
    GroupPrunedNormal,
    /// The exact divergence was computed.
    Exact,
}

impl FilterPath {
    pub const ALL: [FilterPath; 4] = [
        FilterPath::L1Normal,
        FilterPath::L1Anomaly,
        FilterPath::GroupPrunedNormal,
        FilterPath::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterPath::L1Normal => "l1_normal",
            FilterPath::L1Anomaly => "l1_anomaly",
            FilterPath::GroupPrunedNormal => "group_pruned_normal",
            FilterPath::Exact => "exact",
        }
    }

    pub fn is_filtered(self) -> bool {
        self != FilterPath::Exact
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub path: FilterPath,
    /// Whether `tF` fell inside the trigger window.
    pub l1_evaluated: bool,
    pub t_f: f64,
    pub js_min: Option<f64>,
    pub js_max: Option<f64>,
    pub group_bound: Option<f64>,
}

/// Per-segment outcome. Action error and combined score are present only when computed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub id: u64,
    pub re_i: Option<f64>,
    pub re_a: f64,
    pub re_ia: Option<f64>,
    pub anomaly: bool,
    pub label: Option<Label>,
}

/// Reusable pruning detector.
#[derive(Debug, Clone)]
pub struct AdosDetector {
    partition: DimensionPartition,
    config: AdosConfig,
    thresholds: ThresholdConfig,
    omega: f64,
}

impl AdosDetector {
    pub fn new(config: AdosConfig, thresholds: ThresholdConfig, omega: f64) -> Result<Self> {
        config.validate()?;
        thresholds.validate()?;
        Ok(AdosDetector {
            partition: DimensionPartition::new(config.groups)?,
            config,
            thresholds,
            omega,
        })
    }

    pub fn config(&self) -> &AdosConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.thresholds
    }

    /// Weight and offset applied to an action-error value before thresholding.
    fn affine(&self, re_a: f64) -> (f64, f64) {
        if self.config.strict_paper_mode {
            (1.0, 0.0)
        } else {
            (self.omega, (1.0 - self.omega) * re_a)
        }
    }

    pub fn detect(
        &self,
        params: &ClstmParams,
        window: &SequenceWindow,
    ) -> Result<(DetectionResult, FilterDecision)> {
        let pred = clstm_forward(params, window)?;
        self.decide(window, &pred)
    }

    /// Decides one segment from an already computed prediction.
    pub fn decide(
        &self,
        window: &SequenceWindow,
        pred: &Prediction,
    ) -> Result<(DetectionResult, FilterDecision)> {
        let f = window.target.action.as_slice();
        let fhat = pred.action.as_slice();
        let ra = re_a(window.target.interaction.as_slice(), &pred.interaction)?;
        let (w, base) = self.affine(ra);
        let score = |x: f64| w * x + base;
        let th = &self.thresholds;

        let mut result = DetectionResult {
            id: window.target.id,
            re_i: None,
            re_a: ra,
            re_ia: None,
            anomaly: false,
            label: window.target.label,
        };
        let t_f = t_func(f, fhat);
        let mut decision = FilterDecision {
            path: FilterPath::Exact,
            l1_evaluated: false,
            t_f,
            js_min: None,
            js_max: None,
            group_bound: None,
        };

        if self.config.t1 <= t_f && t_f <= self.config.t2 {
            let (lo, hi) = js_l1_bounds(f, fhat);
            decision.l1_evaluated = true;
            decision.js_min = Some(lo);
            decision.js_max = Some(hi);
            if score(hi) < th.t_n {
                decision.path = FilterPath::L1Normal;
                return Ok((result, decision));
            }
            if score(lo) > th.t_a {
                decision.path = FilterPath::L1Anomaly;
                result.anomaly = true;
                return Ok((result, decision));
            }
        }

        let sk_f = adg_sketch(&window.target.action, &self.partition, self.config.sparse_groups);
        let sk_fhat = adg_sketch_aligned(&pred.action, &sk_f, &window.target.action);
        let bound = re_i_group_bound(&sk_f, &sk_fhat, self.config.bound_variant)?;
        decision.group_bound = Some(bound);
        if score(bound) <= th.t_n {
            decision.path = FilterPath::GroupPrunedNormal;
            return Ok((result, decision));
        }

        let partial = sparse_partial(&sk_f, &sk_fhat);
        let ri = re_i_with_partial(f, fhat, &sk_f, partial);
        let total = self.omega * ri + (1.0 - self.omega) * ra;
        result.re_i = Some(ri);
        result.re_ia = Some(total);
        result.anomaly = score(ri) > th.t_a;
        decision.path = FilterPath::Exact;
        Ok((result, decision))
    }
}

/// Runs the pruning detector over every window in order.
pub fn ados_detect(
    windows: &[SequenceWindow],
    params: &ClstmParams,
    omega: f64,
    thresholds: &ThresholdConfig,
    ados: &AdosConfig,
) -> Result<Vec<(DetectionResult, FilterDecision)>> {
    let det = AdosDetector::new(ados.clone(), *thresholds, omega)?;
    windows.iter().map(|w| det.detect(params, w)).collect()
}

/// Chooses the trigger window `[T1, T2]` on calibration windows.
///
/// Segments are sorted by `tF`; those the L1 sandwich would decide count
/// `+1`, those it would not count `-1`, and the window is the maximum-sum
/// contiguous run. Returns an empty window (`T1 > every tF`) when the L1
/// bounds never pay off.
pub fn calibrate_trigger(
    windows: &[SequenceWindow],
    params: &ClstmParams,
    omega: f64,
    thresholds: &ThresholdConfig,
    strict_paper_mode: bool,
) -> Result<(f64, f64)> {
    let mut points = Vec::with_capacity(windows.len());
    for w in windows {
        let pred = clstm_forward(params, w)?;
        let f = w.target.action.as_slice();
        let fhat = pred.action.as_slice();
        let ra = re_a(w.target.interaction.as_slice(), &pred.interaction)?;
        let (wt, base) = if strict_paper_mode {
            (1.0, 0.0)
        } else {
            (omega, (1.0 - omega) * ra)
        };
        let (lo, hi) = js_l1_bounds(f, fhat);
        let resolved = wt * hi + base < thresholds.t_n || wt * lo + base > thresholds.t_a;
        points.push((t_func(f, fhat), if resolved { 1i64 } else { -1 }));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut best, mut best_range) = (0i64, None);
    let (mut run, mut start) = (0i64, 0usize);
    for (i, &(_, v)) in points.iter().enumerate() {
        if run <= 0 {
            run = 0;
            start = i;
        }
        run += v;
        if run > best {
            best = run;
            best_range = Some((start, i));
        }
    }
    Ok(match best_range {
        Some((a, b)) => (points[a].0, points[b].0),
        None => (2.0, 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{random_window, Coupling};
    use crate::scoring::score_all;
    use crate::stream::{ActionFeature, InteractionFeature, SegmentRecord};

    fn random_params(d1: usize, d2: usize, seed: u64) -> ClstmParams {
        ClstmParams::init(d1, d2, 4, 4, Coupling::Full, seed)
    }

    #[test]
    fn empty_stream_gives_empty_output() {
        let p = random_params(6, 3, 0);
        let out = ados_detect(&[], &p, 0.8, &ThresholdConfig::from_tau(0.1), &AdosConfig::default())
            .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn invalid_thresholds_are_a_config_error() {
        let p = random_params(6, 3, 0);
        let bad = ThresholdConfig { tau: 0.1, t_a: 0.1, t_n: 0.2 };
        assert!(matches!(
            ados_detect(&[], &p, 0.8, &bad, &AdosConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn perfectly_fitted_constant_stream_is_pruned() {
        let f = vec![0.7, 0.2, 0.05, 0.05];
        let a = vec![0.3, 0.6];
        let mut p = ClstmParams::zeros(4, 2, 3, 3, Coupling::Full);
        p.decoder_i.b = f.iter().map(|x: &f64| x.ln()).collect();
        p.decoder_a.b = a.clone();
        let seg = |id| SegmentRecord {
            id,
            action: ActionFeature::new(f.clone()).unwrap(),
            interaction: InteractionFeature::new(a.clone()).unwrap(),
            label: None,
        };
        let window = SequenceWindow {
            actions: vec![seg(0).action; 3],
            interactions: vec![seg(0).interaction; 3],
            target: seg(3),
        };
        let windows = vec![window; 20];
        let out = ados_detect(&windows, &p, 0.8, &ThresholdConfig::from_tau(0.05), &AdosConfig::default())
            .unwrap();
        for (r, d) in &out {
            assert!(!r.anomaly);
            assert!(matches!(d.path, FilterPath::L1Normal | FilterPath::GroupPrunedNormal));
        }
    }

    fn labeled_windows(n: usize) -> Vec<SequenceWindow> {
        (0..n as u64).map(|i| random_window(8, 3, 3, 100 + i)).collect()
    }

    #[test]
    fn composite_mode_matches_exhaustive_for_any_trigger_window() {
        let p = random_params(8, 3, 4);
        let windows = labeled_windows(200);
        let scores = score_all(&p, &windows, 0.8).unwrap();
        let mut sorted: Vec<f64> = scores.iter().map(|s| s.re_ia).collect();
        sorted.sort_by(f64::total_cmp);
        let tau = 0.5 * (sorted[150] + sorted[151]);
        let t = ThresholdConfig::from_tau(tau);
        let expected: Vec<bool> = scores.iter().map(|s| s.re_ia > tau).collect();
        for (t1, t2) in [(0.0, 1.0), (0.2, 0.4), (2.0, 2.0), (0.9, 0.1)] {
            for variant in [BoundVariant::CrossCorner, BoundVariant::MaxForm] {
                let cfg = AdosConfig { t1, t2, bound_variant: variant, ..AdosConfig::default() };
                let got: Vec<bool> = ados_detect(&windows, &p, 0.8, &t, &cfg)
                    .unwrap()
                    .iter()
                    .map(|(r, _)| r.anomaly)
                    .collect();
                assert_eq!(got, expected, "t1={t1} t2={t2} {variant:?}");
            }
        }
    }

    #[test]
    fn exact_path_reports_full_scores() {
        let p = random_params(8, 3, 4);
        let windows = labeled_windows(30);
        let scores = score_all(&p, &windows, 0.8).unwrap();
        let t = ThresholdConfig::from_tau(1e-9);
        let cfg = AdosConfig { t1: 2.0, t2: 2.0, ..AdosConfig::default() };
        for ((r, d), s) in ados_detect(&windows, &p, 0.8, &t, &cfg).unwrap().iter().zip(&scores) {
            assert_eq!(d.path, FilterPath::Exact);
            assert!(!d.l1_evaluated);
            assert!((r.re_i.unwrap() - s.re_i).abs() < 1e-14);
            assert!((r.re_ia.unwrap() - s.re_ia).abs() < 1e-14);
            assert_eq!(r.re_a, s.re_a);
        }
    }

    #[test]
    fn strict_mode_thresholds_the_action_error_alone() {
        let p = random_params(8, 3, 4);
        let windows = labeled_windows(100);
        let scores = score_all(&p, &windows, 0.8).unwrap();
        let mut ri: Vec<f64> = scores.iter().map(|s| s.re_i).collect();
        ri.sort_by(f64::total_cmp);
        let tau = 0.5 * (ri[70] + ri[71]);
        let cfg = AdosConfig { strict_paper_mode: true, ..AdosConfig::default() };
        let out = ados_detect(&windows, &p, 0.8, &ThresholdConfig::from_tau(tau), &cfg).unwrap();
        for ((r, _), s) in out.iter().zip(&scores) {
            assert_eq!(r.anomaly, s.re_i > tau);
        }
    }

    #[test]
    fn trigger_calibration_returns_a_usable_window() {
        let p = random_params(8, 3, 4);
        let windows = labeled_windows(100);
        let scores = score_all(&p, &windows, 0.8).unwrap();
        let mean = scores.iter().map(|s| s.re_ia).sum::<f64>() / 100.0;
        let t = ThresholdConfig::from_tau(mean);
        let (t1, t2) = calibrate_trigger(&windows, &p, 0.8, &t, false).unwrap();
        assert!(t1.is_finite() && t2.is_finite());
        AdosConfig { t1, t2, ..AdosConfig::default() }.validate().unwrap();
    }
}
