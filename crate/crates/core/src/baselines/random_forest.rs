use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cart::{grow, AllFeatures, CartTreeModel, RandomSubset};
use super::{check_training, check_width, Classifier};
use crate::{seeded_rng, Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features considered per split; `None` means `⌈√n_features⌉`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams { n_trees: 100, bootstrap: true, max_features: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<CartTreeModel>,
    pub n_features: usize,
}

impl RandomForestModel {
    /// Each tree draws a bootstrap sample of `n` rows and a per-tree RNG
    /// seed from one master RNG, in tree order.
    pub fn fit(x: &Tensor, y: &[u8], params: &RandomForestParams) -> Result<Self> {
        check_training(x, y, "rf_fit")?;
        if params.n_trees == 0 {
            return Err(Error::Validation(alloc::string::String::from("random forest needs at least one tree")));
        }
        let p = x.cols();
        let k = params.max_features.unwrap_or_else(|| libm::ceil(libm::sqrt(p as f64)) as usize).clamp(1, p.max(1));
        let n = y.len();
        let mut master = seeded_rng(params.seed);
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let rows: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| master.gen_range(0..n)).collect() } else { (0..n).collect() };
            let tree_seed: u64 = master.gen();
            let tree = if k >= p {
                grow(x, y, rows, &mut AllFeatures)
            } else {
                grow(x, y, rows, &mut RandomSubset { rng: ChaCha8Rng::seed_from_u64(tree_seed), k })
            };
            trees.push(tree);
        }
        Ok(RandomForestModel { trees, n_features: p })
    }

    /// Count of trees voting for class 1.
    pub fn votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict_row(row) == 1).count()
    }
}

impl Classifier for RandomForestModel {
    /// Majority vote; a tied vote predicts class 1.
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.n_features, "rf_predict")?;
        Ok((0..x.rows()).map(|i| u8::from(2 * self.votes(x.row(i)) >= self.trees.len())).collect())
    }
}

pub fn rf_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor, seed: u64) -> Result<Vec<u8>> {
    RandomForestModel::fit(train_x, train_y, &RandomForestParams { seed, ..Default::default() })?.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::cart::CartNode;

    #[test]
    fn tied_vote_is_class_one() {
        let leaf =
            |class| CartTreeModel { nodes: alloc::vec![CartNode::Leaf { class, counts: [1, 1] }], n_features: 1 };
        let m = RandomForestModel { trees: alloc::vec![leaf(0), leaf(1)], n_features: 1 };
        assert_eq!(m.predict(&Tensor::zeros(&[1, 1])).unwrap(), [1]);
    }
}
