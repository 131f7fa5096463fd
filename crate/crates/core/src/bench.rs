//! Timing of exhaustive versus pruned scoring.
//!
//! Model predictions are computed once up front; the timed section is the
//! scoring stage that pruning actually skips. Times are wall-clock,
//! monotonic, per segment.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{AdosConfig, AdosDetector, FilterPath};
use crate::metrics::FilterStats;
use crate::net::{clstm_forward, Prediction, ClstmParams};
use crate::scoring::{score_prediction, ThresholdConfig};
use crate::stream::SequenceWindow;

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub mean_us: f64,
    pub p99_us: f64,
}

impl Timing {
    fn from_samples(mut us: Vec<f64>) -> Self {
        if us.is_empty() {
            return Timing { mean_us: 0.0, p99_us: 0.0 };
        }
        let mean_us = us.iter().sum::<f64>() / us.len() as f64;
        us.sort_by(f64::total_cmp);
        let idx = ((us.len() as f64 * 0.99).ceil() as usize).clamp(1, us.len()) - 1;
        Timing { mean_us, p99_us: us[idx] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub segments: usize,
    /// Model forward pass, shared by both scoring modes.
    pub forward: Timing,
    pub exhaustive: Timing,
    pub ados: Timing,
    pub stats: FilterStats,
    /// Wall time of each dynamic-update cycle, if any were run.
    pub update_cycles_s: Vec<f64>,
}

impl BenchReport {
    /// Number of segments that needed the exact divergence.
    pub fn exact_calls(&self) -> usize {
        self.stats.exact
    }

    /// Writes the report as a two-column `metric value` table.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.stats;
        let mut rows: Vec<(String, String)> = vec![
            ("segments".into(), self.segments.to_string()),
            ("forward_mean_us".into(), format!("{:.3}", self.forward.mean_us)),
            ("forward_p99_us".into(), format!("{:.3}", self.forward.p99_us)),
            ("exhaustive_mean_us".into(), format!("{:.3}", self.exhaustive.mean_us)),
            ("exhaustive_p99_us".into(), format!("{:.3}", self.exhaustive.p99_us)),
            ("ados_mean_us".into(), format!("{:.3}", self.ados.mean_us)),
            ("ados_p99_us".into(), format!("{:.3}", self.ados.p99_us)),
            ("l1_evaluated".into(), s.l1_evaluated.to_string()),
        ];
        for (path, n) in [
            (FilterPath::L1Normal, s.l1_normal),
            (FilterPath::L1Anomaly, s.l1_anomaly),
            (FilterPath::GroupPrunedNormal, s.group_pruned_normal),
            (FilterPath::Exact, s.exact),
        ] {
            rows.push((format!("count_{}", path.name()), n.to_string()));
        }
        rows.push(("fp_l1".into(), format!("{:.6}", s.fp_l1())));
        rows.push(("fp_group".into(), format!("{:.6}", s.fp_group())));
        rows.push(("fp_total".into(), format!("{:.6}", s.fp_total())));
        rows.push(("exact_js_calls".into(), s.exact.to_string()));
        for (i, t) in self.update_cycles_s.iter().enumerate() {
            rows.push((format!("update_cycle_{}_s", i + 1), format!("{t:.6}")));
        }
        writeln!(out, "metric\tvalue")?;
        for (k, v) in rows {
            writeln!(out, "{k}\t{v}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Times both scoring modes over `windows`, `repeats` times each.
pub fn bench(
    params: &ClstmParams,
    windows: &[SequenceWindow],
    omega: f64,
    thresholds: &ThresholdConfig,
    ados: &AdosConfig,
    repeats: usize,
) -> Result<BenchReport> {
    if windows.is_empty() {
        return Err(Error::Validation("nothing to benchmark".into()));
    }
    let repeats = repeats.max(1);
    let det = AdosDetector::new(ados.clone(), *thresholds, omega)?;

    let mut forward_us = Vec::with_capacity(windows.len());
    let mut preds: Vec<Prediction> = Vec::with_capacity(windows.len());
    for w in windows {
        let t = Instant::now();
        let p = clstm_forward(params, w)?;
        forward_us.push(t.elapsed().as_secs_f64() * 1e6);
        preds.push(p);
    }

    let mut exhaustive_us = vec![0.0; windows.len()];
    let mut ados_us = vec![0.0; windows.len()];
    let mut decisions = Vec::with_capacity(windows.len());
    for rep in 0..repeats {
        for (i, (w, p)) in windows.iter().zip(&preds).enumerate() {
            let t = Instant::now();
            let s = score_prediction(w, p, omega)?;
            std::hint::black_box(s.re_ia > thresholds.tau);
            exhaustive_us[i] += t.elapsed().as_secs_f64() * 1e6 / repeats as f64;

            let t = Instant::now();
            let (r, d) = det.decide(w, p)?;
            std::hint::black_box(r.anomaly);
            ados_us[i] += t.elapsed().as_secs_f64() * 1e6 / repeats as f64;
            if rep == 0 {
                decisions.push(d);
            }
        }
    }
    Ok(BenchReport {
        segments: windows.len(),
        forward: Timing::from_samples(forward_us),
        exhaustive: Timing::from_samples(exhaustive_us),
        ados: Timing::from_samples(ados_us),
        stats: FilterStats::from_decisions(&decisions),
        update_cycles_s: Vec::new(),
    })
}
