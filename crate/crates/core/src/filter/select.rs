//! Soundness check used to pick the dimension-group bound variant.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bounds::{js_l1_bounds, re_i_group_bound, BoundVariant};
use super::partition::DimensionPartition;
use super::sketch::{adg_sketch, adg_sketch_aligned};
use crate::divergence::js_divergence;
use crate::error::Result;
use crate::stream::ActionFeature;

/// Absolute slack allowed when comparing a bound to the exact value.
pub const BOUND_TOL: f64 = 1e-12;

/// Draws a sparse distribution with one to three dominant dimensions.
pub fn random_sparse_simplex(rng: &mut impl Rng, d1: usize) -> ActionFeature {
    let dominant = rng.gen_range(1..=3.min(d1));
    let mut v: Vec<f64> = (0..d1).map(|_| rng.gen_range(0.0..0.01)).collect();
    for d in sample(rng, d1, dominant) {
        v[d] += rng.gen_range(0.2..1.0);
    }
    let s: f64 = v.iter().sum();
    ActionFeature::new(v.into_iter().map(|x| x / s).collect())
        .expect("normalised positive vector is on the simplex")
}

/// Draws a reference distribution and a reconstruction of it.
///
/// Half of the pairs are independent draws; the other half perturb the
/// reference, which is the regime a trained model lives in.
pub fn random_pair(rng: &mut impl Rng, d1: usize) -> (ActionFeature, ActionFeature) {
    let f = random_sparse_simplex(rng, d1);
    let g = if rng.gen_bool(0.5) {
        random_sparse_simplex(rng, d1)
    } else {
        let noise = random_sparse_simplex(rng, d1);
        let mix = rng.gen_range(0.0..0.5);
        let v: Vec<f64> = f
            .as_slice()
            .iter()
            .zip(noise.as_slice())
            .map(|(a, b)| (1.0 - mix) * a + mix * b)
            .collect();
        let s: f64 = v.iter().sum();
        ActionFeature::new(v.into_iter().map(|x| x / s).collect())
            .expect("convex combination stays on the simplex")
    };
    (f, g)
}

/// Outcome of the soundness check for one variant.
#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub variant: BoundVariant,
    /// Pairs where the group bound fell below the exact divergence.
    pub violations: usize,
    pub mean_bound: f64,
}

/// Outcome of the whole check.
#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub pairs: usize,
    pub l1_violations: usize,
    pub variants: Vec<VariantReport>,
    pub mean_exact: f64,
}

impl SoundnessReport {
    /// Tightest variant (lowest mean bound) with no violations.
    pub fn selected(&self) -> Option<BoundVariant> {
        self.variants
            .iter()
            .filter(|v| v.violations == 0)
            .min_by(|a, b| a.mean_bound.total_cmp(&b.mean_bound))
            .map(|v| v.variant)
    }
}

/// Checks the L1 sandwich and every group-bound variant on `pairs` random pairs.
pub fn bound_soundness(
    pairs: usize,
    d1: usize,
    groups: usize,
    sparse_groups: usize,
    seed: u64,
) -> Result<SoundnessReport> {
    let partition = DimensionPartition::new(groups)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l1_violations = 0;
    let mut violations = [0usize; 3];
    let mut sums = [0.0f64; 3];
    let mut exact_sum = 0.0;
    for _ in 0..pairs {
        let (f, g) = random_pair(&mut rng, d1);
        let exact = js_divergence(f.as_slice(), g.as_slice());
        exact_sum += exact;
        let (lo, hi) = js_l1_bounds(f.as_slice(), g.as_slice());
        if lo > exact + BOUND_TOL || exact > hi + BOUND_TOL {
            l1_violations += 1;
        }
        let sk_f = adg_sketch(&f, &partition, sparse_groups);
        let sk_g = adg_sketch_aligned(&g, &sk_f, &f);
        for (i, variant) in BoundVariant::ALL.into_iter().enumerate() {
            let b = re_i_group_bound(&sk_f, &sk_g, variant)?;
            sums[i] += b;
            if exact > b + BOUND_TOL {
                violations[i] += 1;
            }
        }
    }
    let n = pairs.max(1) as f64;
    Ok(SoundnessReport {
        pairs,
        l1_violations,
        variants: BoundVariant::ALL
            .into_iter()
            .enumerate()
            .map(|(i, variant)| VariantReport {
                variant,
                violations: violations[i],
                mean_bound: sums[i] / n,
            })
            .collect(),
        mean_exact: exact_sum / n,
    })
}
