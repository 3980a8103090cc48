use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before the log.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput {
    pub loss: f64,
    /// d loss / d p, evaluated at the clipped probabilities.
    pub grad: Vec<f64>,
}

/// Mean binary cross-entropy of predicted probabilities `p` against 0/1 labels.
pub fn bce_loss(p: &[f64], y: &[u8]) -> Result<BceOutput> {
    if p.len() != y.len() {
        return Err(Error::Shape { op: "bce_loss", detail: format!("{} predictions vs {} labels", p.len(), y.len()) });
    }
    if p.is_empty() {
        return Err(Error::EmptyInput("bce_loss batch"));
    }
    let n = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &yi) in p.iter().zip(y) {
        let q = pi.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        let t = f64::from(yi);
        loss -= t * libm::log(q) + (1.0 - t) * libm::log(1.0 - q);
        grad.push((q - t) / (q * (1.0 - q)) / n);
    }
    Ok(BceOutput { loss: loss / n, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let out = bce_loss(&[1.0 - 1e-7], &[1]).unwrap();
        assert!(out.loss < 1e-6 && out.loss >= 0.0);
    }

    #[test]
    fn coin_flip_costs_ln_two() {
        let ln2 = core::f64::consts::LN_2;
        assert!((bce_loss(&[0.5], &[1]).unwrap().loss - ln2).abs() < 1e-15);
        assert!((bce_loss(&[0.5, 0.5], &[1, 0]).unwrap().loss - ln2).abs() < 1e-15);
    }

    #[test]
    fn gradient_formula() {
        let out = bce_loss(&[0.25, 0.5], &[1, 0]).unwrap();
        assert!((out.grad[0] - (0.25 - 1.0) / (0.25 * 0.75) / 2.0).abs() < 1e-15);
        assert!((out.grad[1] - 0.5 / 0.25 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_predictions_stay_finite() {
        let out = bce_loss(&[0.0, 1.0], &[1, 0]).unwrap();
        assert!(out.loss.is_finite() && out.grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(bce_loss(&[0.5], &[1, 0]), Err(Error::Shape { .. })));
    }
}
