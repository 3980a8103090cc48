use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, Classifier};
use crate::{Error, Result, Tensor};

/// Stores the training set; `k = min(requested, n_train)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Tensor,
    pub y: Vec<u8>,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(x: &Tensor, y: &[u8], k: usize) -> Result<Self> {
        check_training(x, y, "knn_fit")?;
        if k == 0 {
            return Err(Error::Validation(alloc::string::String::from("k must be at least 1")));
        }
        Ok(KnnModel { x: x.clone(), y: y.to_vec(), k: k.min(y.len()) })
    }

    /// Training indices sorted by (squared Euclidean distance, index).
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.y.len())
            .map(|i| (self.x.row(i).iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    fn vote(&self, row: &[f64]) -> u8 {
        let nn = self.neighbours(row);
        let ones = nn.iter().filter(|&&i| self.y[i] == 1).count();
        match (2 * ones).cmp(&nn.len()) {
            core::cmp::Ordering::Greater => 1,
            core::cmp::Ordering::Less => 0,
            core::cmp::Ordering::Equal => self.y[nn[0]],
        }
    }
}

impl Classifier for KnnModel {
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.x.cols(), "knn_predict")?;
        Ok((0..x.rows()).map(|i| self.vote(x.row(i))).collect())
    }
}

pub fn knn_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor) -> Result<Vec<u8>> {
    KnnModel::fit(train_x, train_y, 5)?.predict(x)
}
