//! Jointly trained ensembles of soft decision trees.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ndt::{self, init_tree, TreeConfig, TreeParams, TreeView};
use crate::numcore::{adam_step, bce_loss, AdamConfig, ParamStore, Tensor};
use crate::rng::seeded_stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub depth: usize,
    pub used_features_rate: f64,
    pub n_features: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl ForestConfig {
    /// 25 trees of depth 10 on half the features, batches of 16, 30 epochs,
    /// Adam at learning rate 0.001.
    pub fn new(n_features: usize, seed: u64) -> Self {
        ForestConfig {
            num_trees: 25,
            depth: 10,
            used_features_rate: 0.5,
            n_features,
            batch_size: 16,
            epochs: 30,
            adam: AdamConfig::default(),
            seed,
        }
    }

    /// A single tree over every feature.
    pub fn single_tree(n_features: usize, seed: u64) -> Self {
        ForestConfig { num_trees: 1, used_features_rate: 1.0, ..Self::new(n_features, seed) }
    }

    /// Tree `t` is seeded with `seed ^ t`.
    pub fn tree_config(&self, t: usize) -> TreeConfig {
        TreeConfig {
            depth: self.depth,
            used_features_rate: self.used_features_rate,
            n_features: self.n_features,
            seed: self.seed ^ t as u64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trees < 1 || self.batch_size < 1 || self.epochs < 1 {
            return Err(Error::Validation(format!(
                "num_trees, batch_size and epochs must be at least 1 (got {}, {}, {})",
                self.num_trees, self.batch_size, self.epochs
            )));
        }
        self.adam.validate()?;
        self.tree_config(0).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<TreeParams>,
    /// Mean training loss of each completed epoch.
    pub training_log: Vec<f64>,
}

pub fn init_forest(cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    let trees = (0..cfg.num_trees).map(|t| init_tree(&cfg.tree_config(t))).collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { config: *cfg, trees, training_log: Vec::new() })
}

/// Running mean over trees in index order: `m_t = m_{t-1} + (p_t − m_{t-1}) / t`.
///
/// Equal tree outputs give back that output exactly.
fn mean_in_tree_order<'a>(probs: impl Iterator<Item = &'a Tensor>) -> Result<Tensor> {
    let mut mean: Option<Tensor> = None;
    for (t, p) in probs.enumerate() {
        match mean.as_mut() {
            None => mean = Some(p.clone()),
            Some(m) => {
                m.same_shape(p, "forest_mean")?;
                let count = (t + 1) as f64;
                for (acc, v) in m.data_mut().iter_mut().zip(p.data()) {
                    *acc += (v - *acc) / count;
                }
            }
        }
    }
    mean.ok_or(Error::EmptyInput("forest without trees"))
}

/// Class probabilities `[batch × 2]`, averaged over trees.
pub fn forest_forward(m: &ForestModel, x: &Tensor) -> Result<Tensor> {
    let probs = m.trees.iter().map(|t| ndt::tree_forward(t, x).map(|(_, prob)| prob)).collect::<Result<Vec<_>>>()?;
    mean_in_tree_order(probs.iter())
}

/// Label 1 where the deceased-class probability is at least `threshold`.
pub fn predict(m: &ForestModel, x: &Tensor, threshold: f64) -> Result<Vec<u8>> {
    let prob = forest_forward(m, x)?;
    Ok((0..prob.rows()).map(|i| u8::from(prob.at(i, 1) >= threshold)).collect())
}

fn param_names(t: usize) -> [String; 3] {
    [format!("tree{t:03}.w"), format!("tree{t:03}.b"), format!("tree{t:03}.pi_logits")]
}

/// Forest loss on one batch and the gradient for every tree parameter.
///
/// `store` must hold the tensors of every tree under `param_names`.
pub fn batch_loss_and_grads(
    masks: &[Vec<usize>],
    n_features: usize,
    store: &ParamStore,
    x: &Tensor,
    y: &[u8],
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let names: Vec<[String; 3]> = (0..masks.len()).map(param_names).collect();
    let view = |t: usize| -> Result<TreeView<'_>> {
        let get = |n: &String| store.get(n).ok_or_else(|| Error::Key(format!("missing parameter `{n}`")));
        Ok(TreeView {
            feature_mask: &masks[t],
            n_features,
            w: get(&names[t][0])?,
            b: get(&names[t][1])?,
            pi_logits: get(&names[t][2])?,
        })
    };
    let tapes = (0..masks.len()).map(|t| ndt::forward_tape(view(t)?, x)).collect::<Result<Vec<_>>>()?;
    let prob = mean_in_tree_order(tapes.iter().map(|tp| &tp.prob))?;
    let p1: Vec<f64> = (0..prob.rows()).map(|i| prob.at(i, 1)).collect();
    let bce = bce_loss(&p1, y)?;

    let share = 1.0 / masks.len() as f64;
    let mut grad_prob = Tensor::zeros(prob.shape());
    for (i, g) in bce.grad.iter().enumerate() {
        grad_prob.row_mut(i)[1] = g * share;
    }
    let mut grads = BTreeMap::new();
    for (t, tape) in tapes.iter().enumerate() {
        let g = ndt::backward(view(t)?, tape, &grad_prob)?;
        let [wn, bn, pn] = names[t].clone();
        grads.insert(wn, g.w);
        grads.insert(bn, g.b);
        grads.insert(pn, g.pi_logits);
    }
    Ok((bce.loss, grads))
}

impl ForestModel {
    /// Moves the tree tensors into a `ParamStore` keyed by `tree{t:03}.{w,b,pi_logits}`.
    pub fn to_param_store(&self) -> ParamStore {
        let mut store = ParamStore::new();
        for (t, tree) in self.trees.iter().enumerate() {
            let [wn, bn, pn] = param_names(t);
            store.insert(wn, tree.w.clone());
            store.insert(bn, tree.b.clone());
            store.insert(pn, tree.pi_logits.clone());
        }
        store
    }

    pub fn load_param_store(&mut self, store: &ParamStore) -> Result<()> {
        for (t, tree) in self.trees.iter_mut().enumerate() {
            let [wn, bn, pn] = param_names(t);
            let get = |n: &String| store.get(n).cloned().ok_or_else(|| Error::Key(format!("missing `{n}`")));
            tree.w = get(&wn)?;
            tree.b = get(&bn)?;
            tree.pi_logits = get(&pn)?;
        }
        Ok(())
    }

    pub fn masks(&self) -> Vec<Vec<usize>> {
        self.trees.iter().map(|t| t.feature_mask.clone()).collect()
    }
}

/// Mini-batch Adam on the BCE of the forest's deceased-class probability.
///
/// Each epoch reshuffles the rows with a seeded RNG and visits them in
/// batches of `batch_size`, including a final partial batch. All trees
/// share one Adam step per batch.
pub fn train(mut m: ForestModel, x: &Tensor, y: &[u8]) -> Result<ForestModel> {
    let cfg = m.config;
    cfg.validate()?;
    if x.ndim() != 2 || x.rows() != y.len() {
        return Err(Error::Shape { op: "forest_train", detail: format!("x {:?} vs {} labels", x.shape(), y.len()) });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("forest training set"));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Training(format!(
            "training data has a single class ({} recovered, {} deceased)",
            y.len() - positives,
            positives
        )));
    }

    let masks = m.masks();
    let mut store = m.to_param_store();
    let mut rng = seeded_stream(cfg.seed, 1);
    let mut order: Vec<usize> = (0..y.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.take_rows(batch);
            let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grads) = batch_loss_and_grads(&masks, cfg.n_features, &store, &xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss became {loss}")));
            }
            adam_step(&mut store, &grads, &cfg.adam)?;
            total += loss * batch.len() as f64;
        }
        m.training_log.push(total / y.len() as f64);
    }
    m.load_param_store(&store)?;
    Ok(m)
}

/// Number of mini-batches per epoch.
pub fn batches_per_epoch(n_rows: usize, batch_size: usize) -> usize {
    n_rows.div_ceil(batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_forest_shape() {
        let m = init_forest(&ForestConfig::new(9, 5)).unwrap();
        assert_eq!(m.trees.len(), 25);
        assert!(m.trees.iter().all(|t| t.n_leaves() == 1024 && t.feature_mask.len() == 5));
        assert_ne!(m.trees[0].feature_mask, m.trees[1].feature_mask.clone().into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn batch_count() {
        assert_eq!(batches_per_epoch(2300, 16), 144);
        assert_eq!(batches_per_epoch(16, 16), 1);
    }

    #[test]
    fn mean_of_opposite_trees() {
        let a = Tensor::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = Tensor::from_rows(&[[0.0, 1.0]]).unwrap();
        assert_eq!(mean_in_tree_order([&a, &b].into_iter()).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn threshold_rule() {
        let mut m = init_forest(&ForestConfig { depth: 1, num_trees: 1, ..ForestConfig::new(1, 0) }).unwrap();
        m.trees[0].w = Tensor::zeros(&[1, 1]);
        m.trees[0].b = Tensor::zeros(&[1]);
        let x = Tensor::zeros(&[3, 1]);
        assert_eq!(predict(&m, &x, 0.5).unwrap(), [1, 1, 1]);
        assert_eq!(predict(&m, &x, 0.0).unwrap(), [1, 1, 1]);
        assert_eq!(predict(&m, &x, 0.51).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let m = init_forest(&ForestConfig { depth: 2, num_trees: 2, ..ForestConfig::new(2, 0) }).unwrap();
        let x = Tensor::zeros(&[4, 2]);
        assert!(matches!(train(m, &x, &[1, 1, 1, 1]), Err(Error::Training(_))));
    }

    #[test]
    fn invalid_config() {
        assert!(init_forest(&ForestConfig { num_trees: 0, ..ForestConfig::new(3, 0) }).is_err());
        assert!(init_forest(&ForestConfig { batch_size: 0, ..ForestConfig::new(3, 0) }).is_err());
    }
}
