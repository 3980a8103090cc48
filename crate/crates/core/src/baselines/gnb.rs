use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, require_both_classes, Classifier};
use crate::{Result, Tensor};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNBModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Population variances, floored at `VARIANCE_FLOOR`.
    pub variances: [Vec<f64>; 2],
}

impl GaussianNBModel {
    pub fn fit(x: &Tensor, y: &[u8]) -> Result<Self> {
        check_training(x, y, "gnb_fit")?;
        require_both_classes(y, "gnb_fit")?;
        let p = x.cols();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; p], vec![0.0; p]];
        for (i, &c) in y.iter().enumerate() {
            let c = usize::from(c);
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = [vec![0.0; p], vec![0.0; p]];
        for (i, &c) in y.iter().enumerate() {
            let c = usize::from(c);
            for j in 0..p {
                let d = x.at(i, j) - means[c][j];
                variances[c][j] += d * d;
            }
        }
        for c in 0..2 {
            variances[c].iter_mut().for_each(|v| *v = (*v / counts[c] as f64).max(VARIANCE_FLOOR));
        }
        let n = y.len() as f64;
        Ok(GaussianNBModel { priors: [counts[0] as f64 / n, counts[1] as f64 / n], means, variances })
    }

    /// Log prior plus the sum of per-feature Gaussian log-densities.
    pub fn log_joint(&self, row: &[f64], class: usize) -> f64 {
        let mut s = libm::log(self.priors[class]);
        for ((x, m), v) in row.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            s -= 0.5 * libm::log(2.0 * core::f64::consts::PI * v) + (x - m) * (x - m) / (2.0 * v);
        }
        s
    }
}

impl Classifier for GaussianNBModel {
    /// Class 1 only when its score is strictly larger.
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.means[0].len(), "gnb_predict")?;
        Ok((0..x.rows()).map(|i| u8::from(self.log_joint(x.row(i), 1) > self.log_joint(x.row(i), 0))).collect())
    }
}

pub fn gnb_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor) -> Result<Vec<u8>> {
    GaussianNBModel::fit(train_x, train_y)?.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_feature_gets_floor() {
        let x = Tensor::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        let m = GaussianNBModel::fit(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.variances[0][0], VARIANCE_FLOOR);
        let pred = m.predict(&Tensor::from_rows(&[[1.0], [2.0]]).unwrap()).unwrap();
        assert_eq!(pred, [0, 0]);
        assert!(m.log_joint(&[1.0], 0).is_finite());
    }

    #[test]
    fn tie_goes_to_class_zero() {
        let x = Tensor::from_rows(&[[0.0], [2.0], [0.0], [2.0]]).unwrap();
        let m = GaussianNBModel::fit(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.predict(&Tensor::from_rows(&[[1.0], [7.0]]).unwrap()).unwrap(), [0, 0]);
    }

    #[test]
    fn priors_sum_to_one() {
        let x = Tensor::from_rows(&[[0.0], [2.0], [5.0]]).unwrap();
        let m = GaussianNBModel::fit(&x, &[0, 0, 1]).unwrap();
        assert!((m.priors[0] + m.priors[1] - 1.0).abs() < 1e-15);
    }
}
