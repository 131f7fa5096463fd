//! Evaluation metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{FilterDecision, FilterPath};

/// ROC curve points `(fpr, tpr)` plus the area under it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auroc: f64,
}

/// ROC curve of `scores` against binary `labels` (true = anomaly).
///
/// Tied scores move the curve diagonally as a block, so the area equals the
/// probability that a random anomaly outranks a random normal segment with
/// ties counted as half.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::shape("labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation(
            "ROC needs both anomalous and normal segments".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve {
        points,
        auroc: area / (pos as f64 * neg as f64),
    })
}

pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(roc_curve(scores, labels)?.auroc)
}

/// Counts of each decision path plus the filtering power.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterStats {
    pub segments: usize,
    pub l1_evaluated: usize,
    pub l1_normal: usize,
    pub l1_anomaly: usize,
    pub group_pruned_normal: usize,
    pub exact: usize,
}

impl FilterStats {
    pub fn from_decisions<'a>(decisions: impl IntoIterator<Item = &'a FilterDecision>) -> Self {
        let mut s = FilterStats::default();
        for d in decisions {
            s.segments += 1;
            s.l1_evaluated += d.l1_evaluated as usize;
            match d.path {
                FilterPath::L1Normal => s.l1_normal += 1,
                FilterPath::L1Anomaly => s.l1_anomaly += 1,
                FilterPath::GroupPrunedNormal => s.group_pruned_normal += 1,
                FilterPath::Exact => s.exact += 1,
            }
        }
        s
    }

    /// Share of segments decided by the L1 sandwich.
    pub fn fp_l1(&self) -> f64 {
        self.ratio(self.l1_normal + self.l1_anomaly)
    }

    /// Share of segments decided by the group bound.
    pub fn fp_group(&self) -> f64 {
        self.ratio(self.group_pruned_normal)
    }

    /// Share of segments that never needed the exact divergence.
    pub fn fp_total(&self) -> f64 {
        self.ratio(self.segments - self.exact)
    }

    /// Share of segments that needed the exact divergence.
    pub fn exact_fraction(&self) -> f64 {
        self.ratio(self.exact)
    }

    fn ratio(&self, n: usize) -> f64 {
        if self.segments == 0 {
            0.0
        } else {
            n as f64 / self.segments as f64
        }
    }
}

/// Per-path counts and fractions of a non-empty decision list.
pub fn filtering_power(decisions: &[FilterDecision]) -> Result<FilterStats> {
    if decisions.is_empty() {
        return Err(Error::Validation("no filter decisions to summarise".into()));
    }
    Ok(FilterStats::from_decisions(decisions))
}
