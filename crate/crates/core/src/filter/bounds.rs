//! Cheap bounds on the Jensen–Shannon reconstruction error.

use serde::{Deserialize, Serialize};

use super::sketch::{AdgSketch, GroupStats};
use crate::divergence::{js_term, l1_distance, LOG_FLOOR};
use crate::error::{Error, Result};

/// L1 sandwich `(0.125·‖f−f̂‖₁², 0.5·‖f−f̂‖₁)` around the JS divergence in nats.
pub fn js_l1_bounds(f: &[f64], fhat: &[f64]) -> (f64, f64) {
    let l1 = l1_distance(f, fhat);
    (0.125 * l1 * l1, 0.5 * l1)
}

/// Gap between `f` and `f̂` on the dominant dimension of `f` (first index on ties).
pub fn t_func(f: &[f64], fhat: &[f64]) -> f64 {
    let mut best = 0;
    for (i, &v) in f.iter().enumerate() {
        if v > f[best] {
            best = i;
        }
    }
    (f[best] - fhat[best]).abs()
}

/// Per-group formula used by the dimension-group upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    /// `m/2 · ln(max(f_max, f̂_max)·min(f_min, f̂_min) / (M_min·M_max))`.
    MinForm,
    /// As `MinForm` with `max(f_min, f̂_min)` in the numerator.
    MaxForm,
    /// `m · max(φ(f_min, f̂_max), φ(f_max, f̂_min))` with `φ` the per-coordinate JS term.
    ///
    /// `φ` is jointly convex, so its maximum over the box
    /// `[f_min, f_max] × [f̂_min, f̂_max]` sits at a vertex; it grows with the
    /// gap between its arguments, which rules out the two vertices on the
    /// diagonal side. Every member coordinate therefore contributes at most
    /// this value and the sum over members is bounded by `m` times it.
    #[default]
    CrossCorner,
}

impl BoundVariant {
    pub const ALL: [BoundVariant; 3] = [
        BoundVariant::MinForm,
        BoundVariant::MaxForm,
        BoundVariant::CrossCorner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::MinForm => "min-form",
            BoundVariant::MaxForm => "max-form",
            BoundVariant::CrossCorner => "cross-corner",
        }
    }
}

fn group_term(
    variant: BoundVariant,
    f: &GroupStats,
    fhat: &GroupStats,
    midpoint: Option<(f64, f64)>,
) -> Result<f64> {
    let m = f.count as f64;
    match variant {
        BoundVariant::CrossCorner => {
            Ok(m * js_term(f.min, fhat.max).max(js_term(f.max, fhat.min)))
        }
        BoundVariant::MinForm | BoundVariant::MaxForm => {
            let (mid_min, mid_max) = midpoint.ok_or_else(|| {
                Error::Config(format!(
                    "{} bound needs a sketch aligned to the reference feature",
                    variant.name()
                ))
            })?;
            let top = f.max.max(fhat.max);
            let low = if variant == BoundVariant::MinForm {
                f.min.min(fhat.min)
            } else {
                f.min.max(fhat.min)
            };
            let num = top.max(LOG_FLOOR) * low.max(LOG_FLOOR);
            let den = mid_min.max(LOG_FLOOR) * mid_max.max(LOG_FLOOR);
            Ok(0.5 * m * (num / den).ln())
        }
    }
}

/// Exact JS contribution of the sparse groups; `(sum, per-group sums)`.
pub fn sparse_partial(sk_f: &AdgSketch, sk_fhat: &AdgSketch) -> f64 {
    sk_f
        .sparse_exact
        .iter()
        .zip(&sk_fhat.sparse_exact)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(&(_, x), &(_, y))| js_term(x, y))
                .sum::<f64>()
        })
        .sum()
}

/// Upper bound on `re_i(f, f̂)` from two aligned sketches.
///
/// Sparse groups contribute their exact partial divergence, other occupied
/// groups the `variant` formula, and empty groups nothing.
pub fn re_i_group_bound(sk_f: &AdgSketch, sk_fhat: &AdgSketch, variant: BoundVariant) -> Result<f64> {
    if *sk_f.grouping != *sk_fhat.grouping {
        return Err(Error::Config(
            "sketches were built over different dimension assignments".into(),
        ));
    }
    let grouping = &sk_f.grouping;
    let mut total = sparse_partial(sk_f, sk_fhat);
    for g in 0..grouping.n_groups {
        if grouping.is_sparse(g) {
            continue;
        }
        if let (Some(a), Some(b)) = (&sk_f.groups[g], &sk_fhat.groups[g]) {
            let mid = sk_fhat.midpoint.as_ref().map(|m| m[g]);
            total += group_term(variant, a, b, mid)?;
        }
    }
    Ok(total)
}

/// Exact JS divergence over the non-sparse dimensions plus a precomputed sparse partial.
pub fn re_i_with_partial(f: &[f64], fhat: &[f64], sk_f: &AdgSketch, partial: f64) -> f64 {
    let grouping = &sk_f.grouping;
    let mut total = partial;
    for g in 0..grouping.n_groups {
        if grouping.is_sparse(g) {
            continue;
        }
        for &d in &grouping.members[g] {
            total += js_term(f[d as usize], fhat[d as usize]);
        }
    }
    total
}
