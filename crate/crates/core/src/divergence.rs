//! Divergences and distances between feature vectors.
//!
//! Everything here works in natural-log units (nats). The Jensen–Shannon
//! divergence of two probability vectors therefore lies in `[0, ln 2]`.

/// Tolerance used when checking that a vector lies on the probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Floor applied to arguments of logarithms that may legitimately reach zero.
pub const LOG_FLOOR: f64 = 1e-12;

/// Contribution of one coordinate to the Jensen–Shannon divergence.
///
/// Returns `½·x·ln(x/m) + ½·y·ln(y/m)` with `m = (x+y)/2` and the
/// convention `0·ln(0/m) = 0`. When `x > 0` we have `m ≥ x/2 > 0`, so the
/// logarithm is always finite.
#[inline]
pub fn js_term(x: f64, y: f64) -> f64 {
    let m = 0.5 * (x + y);
    let mut s = 0.0;
    if x > 0.0 {
        s += x * (x / m).ln();
    }
    if y > 0.0 {
        s += y * (y / m).ln();
    }
    0.5 * s
}

/// Jensen–Shannon divergence in nats. Symmetric in its arguments.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(&x, &y)| js_term(x, y)).sum()
}

/// Kullback–Leibler divergence `KL(p ‖ q)` in nats, with `q` floored at [`LOG_FLOOR`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y.max(LOG_FLOOR)).ln())
        .sum()
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub fn l2_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Mean squared error over all entries. Zero for empty input.
pub fn mse(p: &[f64], q: &[f64]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

/// True if every entry is in `[0, 1]` and the entries sum to one within [`SIMPLEX_TOL`].
pub fn is_simplex(v: &[f64]) -> bool {
    !v.is_empty()
        && v.iter().all(|x| x.is_finite() && *x >= 0.0 && *x <= 1.0)
        && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}
