//! Seeded generator of labeled two-stream data.
//!
//! Normal behaviour cycles through a small dictionary of presenter styles.
//! Each style is a sparse distribution with one to three dominant action
//! classes and its own audience comment rate. The audience reacts to the
//! presenter: comment intensity follows the current style through a smooth
//! autoregressive process, and rises noticeably in the segment just before
//! the presenter moves on to the next style in the cycle. Anomalies switch
//! to a combination of the dictionary's action classes that no style uses
//! and coincide with a comment burst.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::Result;
use crate::stream::{
    build_interaction_feature, ActionFeature, CountNormalizer, InteractionCounts, Label,
    SegmentRecord, StreamConfig,
};

const DOMINANT_MASS: f64 = 0.9;
const STYLE_JITTER: f64 = 0.1;
const AR_KEEP: f64 = 0.7;
const EXTRA_NOISE: f64 = 0.03;

#[derive(Debug, Clone)]
struct Style {
    base: Vec<f64>,
    rate: f64,
    extras: Vec<f64>,
}

/// Generator output: the labeled segments and the raw counts behind them.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub segments: Vec<SegmentRecord>,
    pub counts: InteractionCounts,
    /// Dictionary style of each segment, `None` for anomalies.
    pub styles: Vec<Option<usize>>,
}

/// Generates `cfg.segments` labeled segments. Deterministic in `cfg.seed`.
pub fn synth_stream(cfg: &StreamConfig) -> Result<Vec<SegmentRecord>> {
    Ok(generate(cfg)?.segments)
}

pub fn generate(cfg: &StreamConfig) -> Result<SyntheticStream> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Disjoint dimension pools, one per dictionary.
    let mut dims: Vec<usize> = (0..cfg.d1).collect();
    dims.shuffle(&mut rng);
    let per_dict = (3 * cfg.styles).min(cfg.d1 / 2).max(1);
    let (pool_a, rest) = dims.split_at(per_dict);
    let pool_b = &rest[..per_dict.min(rest.len())];

    let dict_a = make_dictionary(&mut rng, cfg, pool_a, (3.0, 8.0));
    let dict_b = make_dictionary(&mut rng, cfg, pool_b, (6.0, 12.0));

    let n = cfg.segments;
    let k = cfg.k;
    let mut styles = Vec::with_capacity(n);
    let mut precursor = vec![false; n];
    let mut cur = 0usize;
    for i in 0..n {
        if cfg.shift_at == Some(i) {
            cur = 0;
        } else if i > 0 && rng.gen::<f64>() < cfg.switch_prob {
            cur = (cur + 1) % cfg.styles;
            precursor[i - 1] = true;
        }
        styles.push(cur);
    }
    let anomalous: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < cfg.anomaly_rate).collect();

    let jitter = Normal::new(0.0, STYLE_JITTER).expect("valid normal");
    let extra_noise = Normal::new(0.0, EXTRA_NOISE).expect("valid normal");
    let mut actions = Vec::with_capacity(n);
    let mut extras = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let mut intensity = None;
    for i in 0..n {
        let (dict, pool) = match cfg.shift_at {
            Some(at) if i >= at => (&dict_b, pool_b),
            _ => (&dict_a, pool_a),
        };
        let style = &dict[styles[i]];
        let x = intensity.map_or(style.rate, |x: f64| AR_KEEP * x + (1.0 - AR_KEEP) * style.rate);
        intensity = Some(x);
        if anomalous[i] {
            let odd = make_style(&mut rng, cfg.d1, pool, (1.0, 1.0), cfg.extra_channels);
            actions.push(perturb(&mut rng, &odd.base, &jitter));
            extras.push((0..cfg.extra_channels).map(|_| rng.gen::<f64>()).collect::<Vec<_>>());
            rates.push(x * cfg.burst_gain);
        } else {
            actions.push(perturb(&mut rng, &style.base, &jitter));
            extras.push(
                style
                    .extras
                    .iter()
                    .map(|e| (e + extra_noise.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect(),
            );
            rates.push(if precursor[i] { x * cfg.precursor_gain } else { x });
        }
    }

    let mut per_moment = Vec::with_capacity(n * k);
    for &rate in &rates {
        let pois = Poisson::new(rate.max(1e-9)).expect("positive rate");
        for _ in 0..k {
            per_moment.push(pois.sample(&mut rng) as u32);
        }
    }
    let counts = InteractionCounts::new(per_moment, cfg.s)?;

    let mut normalizer = CountNormalizer::default();
    let mut segments = Vec::with_capacity(n);
    for i in 0..n {
        if i % cfg.slot_len == 0 {
            // Fold in the slot that just ended, or the first slot at start-up.
            let from = if i == 0 { 0 } else { i - cfg.slot_len };
            let to = if i == 0 { cfg.slot_len.min(n) } else { i };
            for t in from * k..to * k {
                normalizer.observe(counts.aggregate(t)?);
            }
            normalizer.refresh();
        }
        let interaction = build_interaction_feature(&counts, i, k, &normalizer, &extras[i])?;
        let label = if anomalous[i] {
            Label::Anomaly
        } else {
            Label::Normal
        };
        segments.push(SegmentRecord {
            id: i as u64,
            action: ActionFeature::from_trusted(actions[i].clone()),
            interaction,
            label: Some(label),
        });
    }

    let styles = (0..n)
        .map(|i| (!anomalous[i]).then_some(styles[i]))
        .collect();
    Ok(SyntheticStream {
        segments,
        counts,
        styles,
    })
}

fn make_dictionary(
    rng: &mut ChaCha8Rng,
    cfg: &StreamConfig,
    pool: &[usize],
    rate_range: (f64, f64),
) -> Vec<Style> {
    let chunk = (pool.len() / cfg.styles).max(1);
    (0..cfg.styles)
        .map(|s| {
            let start = (s * chunk) % pool.len();
            let end = (start + chunk).min(pool.len());
            make_style(rng, cfg.d1, &pool[start..end], rate_range, cfg.extra_channels)
        })
        .collect()
}

fn make_style(
    rng: &mut ChaCha8Rng,
    d1: usize,
    pool: &[usize],
    rate_range: (f64, f64),
    extra_channels: usize,
) -> Style {
    let n_dom = rng.gen_range(1..=3).min(pool.len());
    let dominant: Vec<usize> = pool.choose_multiple(rng, n_dom).cloned().collect();
    let weights: Vec<f64> = (0..n_dom).map(|_| rng.gen_range(0.5..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let background: Vec<f64> = (0..d1).map(|_| rng.gen_range(0.2..1.0)).collect();
    let bsum: f64 = background.iter().sum();
    let mut base: Vec<f64> = background
        .iter()
        .map(|b| (1.0 - DOMINANT_MASS) * b / bsum)
        .collect();
    for (&d, w) in dominant.iter().zip(&weights) {
        base[d] += DOMINANT_MASS * w / wsum;
    }
    let rate = if rate_range.0 < rate_range.1 {
        rng.gen_range(rate_range.0..rate_range.1)
    } else {
        rate_range.0
    };
    Style {
        base,
        rate,
        extras: (0..extra_channels).map(|_| rng.gen_range(0.2..0.8)).collect(),
    }
}

fn perturb(rng: &mut ChaCha8Rng, base: &[f64], jitter: &Normal<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = base
        .iter()
        .map(|b| b * jitter.sample(rng).exp())
        .collect();
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
    v
}
