use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, require_both_classes, Classifier};
use crate::{seeded_rng, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        LinearSvmParams { lambda: 1e-4, epochs: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvmModel {
    /// Pegasos: step `1 / (λ t)` on the hinge loss, projection onto the
    /// ball of radius `1/√λ`, one seeded pass over a fresh permutation per
    /// epoch. The bias is learned as the weight of a constant feature 1.
    pub fn fit(x: &Tensor, y: &[u8], params: &LinearSvmParams) -> Result<Self> {
        check_training(x, y, "svm_fit")?;
        require_both_classes(y, "svm_fit")?;
        let p = x.cols();
        let lambda = params.lambda;
        // Last slot is the bias.
        let mut w = vec![0.0; p + 1];
        let mut rng = seeded_rng(params.seed);
        let mut order: Vec<usize> = (0..y.len()).collect();
        let radius = 1.0 / libm::sqrt(lambda);
        let mut t = 0u64;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let label = if y[i] == 1 { 1.0 } else { -1.0 };
                let row = x.row(i);
                let margin = label * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[p]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(row) {
                        *wj += eta * label * xj;
                    }
                    w[p] += eta * label;
                }
                let norm = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>());
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        let bias = w.pop().unwrap_or(0.0);
        Ok(LinearSvmModel { weights: w, bias })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }
}

impl Classifier for LinearSvmModel {
    /// Sign of the decision value; zero predicts class 1.
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.weights.len(), "svm_predict")?;
        Ok((0..x.rows()).map(|i| u8::from(self.decision(x.row(i)) >= 0.0)).collect())
    }
}

pub fn svm_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor, seed: u64) -> Result<Vec<u8>> {
    LinearSvmModel::fit(train_x, train_y, &LinearSvmParams { seed, ..Default::default() })?.predict(x)
}
