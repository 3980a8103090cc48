use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, require_both_classes, Classifier};
use crate::numcore::kernels::sigmoid_scalar;
use crate::{Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionParams {
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticRegressionParams {
    fn default() -> Self {
        LogisticRegressionParams { learning_rate: 0.1, iterations: 1000 }
    }
}

/// `P = exp(z) / (1 + exp(z))` with `z = beta0 + Σ beta_i x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl LogisticRegressionModel {
    /// Full-batch gradient descent on mean BCE from all-zero coefficients.
    pub fn fit(x: &Tensor, y: &[u8], params: &LogisticRegressionParams) -> Result<Self> {
        check_training(x, y, "logreg_fit")?;
        require_both_classes(y, "logreg_fit")?;
        let (n, p) = (x.rows(), x.cols());
        let mut beta0 = 0.0;
        let mut beta = vec![0.0; p];
        let mut g = vec![0.0; p];
        for _ in 0..params.iterations {
            let mut g0 = 0.0;
            g.iter_mut().for_each(|v| *v = 0.0);
            for (i, &label) in y.iter().enumerate() {
                let row = x.row(i);
                let z = beta0 + row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
                let err = sigmoid_scalar(z) - f64::from(label);
                g0 += err;
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj += err * xj;
                }
            }
            beta0 -= params.learning_rate * g0 / n as f64;
            for (b, gj) in beta.iter_mut().zip(&g) {
                *b -= params.learning_rate * gj / n as f64;
            }
        }
        Ok(LogisticRegressionModel { beta0, beta, learning_rate: params.learning_rate, iterations: params.iterations })
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        let z = self.beta0 + row.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>();
        sigmoid_scalar(z)
    }
}

impl Classifier for LogisticRegressionModel {
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.beta.len(), "logreg_predict")?;
        Ok((0..x.rows()).map(|i| u8::from(self.probability(x.row(i)) >= 0.5)).collect())
    }
}

pub fn logreg_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor) -> Result<Vec<u8>> {
    LogisticRegressionModel::fit(train_x, train_y, &Default::default())?.predict(x)
}
