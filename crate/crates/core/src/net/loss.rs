//! Training objective: weighted action divergence plus audience MSE.

use serde::{Deserialize, Serialize};

use crate::divergence::{is_simplex, js_divergence, kl_divergence, mse, LOG_FLOOR};
use crate::error::{ensure_len, Error, Result};

/// Reconstruction error used for the action part of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Jensen–Shannon divergence.
    #[default]
    Js,
    /// `KL(f ‖ f̂)`.
    Kl,
    /// Squared Euclidean distance `‖f̂ − f‖²`.
    L2,
}

pub(crate) fn action_loss(kind: LossKind, fhat: &[f64], f: &[f64]) -> f64 {
    match kind {
        LossKind::Js => js_divergence(fhat, f),
        LossKind::Kl => kl_divergence(f, fhat),
        LossKind::L2 => fhat.iter().zip(f).map(|(p, t)| (p - t) * (p - t)).sum(),
    }
}

/// Writes `∂loss/∂f̂` into `out`.
pub(crate) fn action_loss_grad(kind: LossKind, fhat: &[f64], f: &[f64], out: &mut [f64]) {
    for ((o, &p), &t) in out.iter_mut().zip(fhat).zip(f) {
        *o = match kind {
            LossKind::Js => {
                if p > 0.0 {
                    0.5 * (2.0 * p / (p + t)).ln()
                } else {
                    0.0
                }
            }
            LossKind::Kl => {
                if p > LOG_FLOOR {
                    -t / p
                } else {
                    0.0
                }
            }
            LossKind::L2 => 2.0 * (p - t),
        };
    }
}

/// `ω·JS(f̂, f) + (1-ω)·MSE(â, a)`.
pub fn loss(fhat: &[f64], f: &[f64], ahat: &[f64], a: &[f64], omega: f64) -> Result<f64> {
    loss_with(LossKind::Js, fhat, f, ahat, a, omega)
}

pub fn loss_with(
    kind: LossKind,
    fhat: &[f64],
    f: &[f64],
    ahat: &[f64],
    a: &[f64],
    omega: f64,
) -> Result<f64> {
    ensure_len("reconstructed action", f.len(), fhat.len())?;
    ensure_len("reconstructed interaction", a.len(), ahat.len())?;
    if !is_simplex(fhat) || !is_simplex(f) {
        return Err(Error::Validation(
            "action loss requires probability vectors".into(),
        ));
    }
    Ok(omega * action_loss(kind, fhat, f) + (1.0 - omega) * mse(ahat, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[0.2, 0.8], &[0.2, 0.8], &[0.1], &[0.1], 0.7).unwrap(), 0.0);
        let l = loss(&[0.0, 1.0], &[1.0, 0.0], &[0.0], &[0.0], 1.0).unwrap();
        assert!((l - LN_2).abs() < 1e-12);
        let l = loss(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(l, 1.0);
    }

    #[test]
    fn loss_rejects_non_simplex() {
        assert!(loss(&[0.5, 0.6], &[0.5, 0.5], &[0.0], &[0.0], 0.5).is_err());
        assert!(loss(&[0.5, 0.5], &[0.5], &[0.0], &[0.0], 0.5).is_err());
    }

    #[test]
    fn action_gradients_match_finite_differences() {
        let p = [0.2, 0.3, 0.5];
        let t = [0.6, 0.1, 0.3];
        for kind in [LossKind::Js, LossKind::Kl, LossKind::L2] {
            let mut g = [0.0; 3];
            action_loss_grad(kind, &p, &t, &mut g);
            for i in 0..3 {
                let h = 1e-6;
                let mut up = p;
                let mut dn = p;
                up[i] += h;
                dn[i] -= h;
                let fd = (action_loss(kind, &up, &t) - action_loss(kind, &dn, &t)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "{kind:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }
}
