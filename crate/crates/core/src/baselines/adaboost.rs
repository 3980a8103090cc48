use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, Classifier};
use crate::{Result, Tensor};

/// Weighted errors are floored here before computing a stage weight.
pub const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { n_rounds: 50 }
    }
}

/// Depth-1 tree: `x[feature] <= threshold` predicts `left_class`, otherwise
/// the other class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left_class: u8,
}

impl Stump {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        if row[self.feature] <= self.threshold {
            self.left_class
        } else {
            1 - self.left_class
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    /// (stump, stage weight α)
    pub stages: Vec<(Stump, f64)>,
    /// Used only when no stump could be fitted: class with the larger weight.
    pub fallback: u8,
    pub n_features: usize,
    /// Weighted error of each fitted round.
    pub errors: Vec<f64>,
}

/// `α = ½ ln((1 − ε) / ε)` with `ε` floored at `MIN_ERROR`.
pub fn stage_weight(error: f64) -> f64 {
    let e = error.max(MIN_ERROR);
    0.5 * libm::log((1.0 - e) / e)
}

/// Lowest weighted error stump; ties keep the earliest candidate in
/// (feature, threshold, left class 0 before 1) order.
fn best_stump(x: &Tensor, y: &[u8], w: &[f64]) -> Option<(Stump, f64)> {
    let total1: f64 = y.iter().zip(w).filter(|(c, _)| **c == 1).map(|(_, w)| w).sum();
    let total0: f64 = y.iter().zip(w).filter(|(c, _)| **c == 0).map(|(_, w)| w).sum();
    let mut best: Option<(Stump, f64)> = None;
    let mut order: Vec<usize> = (0..y.len()).collect();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.at(a, f).total_cmp(&x.at(b, f)).then(a.cmp(&b)));
        let (mut left0, mut left1) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let i = order[k];
            if y[i] == 1 {
                left1 += w[i];
            } else {
                left0 += w[i];
            }
            let (lo, hi) = (x.at(i, f), x.at(order[k + 1], f));
            if lo == hi {
                continue;
            }
            let threshold = (lo + hi) / 2.0;
            // Left predicts 0: errors are left 1s and right 0s.
            let err_left0 = left1 + (total0 - left0);
            let err_left1 = left0 + (total1 - left1);
            for (left_class, err) in [(0u8, err_left0), (1u8, err_left1)] {
                if best.is_none_or(|(_, e)| err < e) {
                    best = Some((Stump { feature: f, threshold, left_class }, err));
                }
            }
        }
    }
    best
}

impl AdaBoostModel {
    pub fn fit(x: &Tensor, y: &[u8], params: &AdaBoostParams) -> Result<Self> {
        check_training(x, y, "adaboost_fit")?;
        let n = y.len();
        let mut w = alloc::vec![1.0 / n as f64; n];
        let ones = y.iter().filter(|&&v| v == 1).count();
        let mut model = AdaBoostModel {
            stages: Vec::new(),
            fallback: u8::from(2 * ones >= n),
            n_features: x.cols(),
            errors: Vec::new(),
        };
        for _ in 0..params.n_rounds {
            let Some((stump, err)) = best_stump(x, y, &w) else { break };
            if err >= 0.5 {
                break;
            }
            let alpha = stage_weight(err);
            model.stages.push((stump, alpha));
            model.errors.push(err);
            if err <= 0.0 {
                break;
            }
            let mut total = 0.0;
            for (i, wi) in w.iter_mut().enumerate() {
                let agree = stump.predict_row(x.row(i)) == y[i];
                *wi *= libm::exp(if agree { -alpha } else { alpha });
                total += *wi;
            }
            w.iter_mut().for_each(|wi| *wi /= total);
        }
        Ok(model)
    }

    /// `Σ α_t h_t(x)` with `h ∈ {−1, +1}` (+1 for class 1).
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.stages.iter().map(|(s, a)| if s.predict_row(row) == 1 { *a } else { -*a }).sum()
    }
}

impl Classifier for AdaBoostModel {
    /// Non-negative decision values predict class 1.
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.n_features, "adaboost_predict")?;
        Ok((0..x.rows())
            .map(|i| if self.stages.is_empty() { self.fallback } else { u8::from(self.decision(x.row(i)) >= 0.0) })
            .collect())
    }
}

pub fn adaboost_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor) -> Result<Vec<u8>> {
    AdaBoostModel::fit(train_x, train_y, &Default::default())?.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_stump_halts_with_capped_weight() {
        let x = Tensor::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let m = AdaBoostModel::fit(&x, &[0, 0, 1, 1], &Default::default()).unwrap();
        assert_eq!(m.stages.len(), 1);
        assert!((m.stages[0].1 - 0.5 * libm::log((1.0 - 1e-10) / 1e-10)).abs() < 1e-9);
        assert_eq!(m.predict(&x).unwrap(), [0, 0, 1, 1]);
    }

    #[test]
    fn constant_features_fall_back_to_majority() {
        let x = Tensor::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let m = AdaBoostModel::fit(&x, &[0, 1, 1], &Default::default()).unwrap();
        assert!(m.stages.is_empty());
        assert_eq!(m.predict(&x).unwrap(), [1, 1, 1]);
    }
}
