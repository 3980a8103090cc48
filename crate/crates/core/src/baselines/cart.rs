//! CART classification tree with Gini impurity.
//!
//! Split candidates are the midpoints between consecutive distinct values
//! of a feature; rows with `x <= threshold` go left. The split maximising
//! `Σ_children (n0² + n1²) / n_child` (equivalently, minimising the
//! weighted child Gini) wins, compared exactly in integer arithmetic.
//! Ties go to the lowest feature index, then the lowest threshold. Growth
//! stops at pure nodes, nodes with fewer than two rows, and nodes where no
//! candidate feature varies.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, check_width, Classifier};
use crate::{Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CartNode {
    Leaf { class: u8, counts: [usize; 2] },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTreeModel {
    pub nodes: Vec<CartNode>,
    pub n_features: usize,
}

/// `1 − Σ p_c²`.
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Exact split score `num / den` with `num = A·n_r + B·n_l`, `den = n_l·n_r`.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Score { num: sq(left) * nr + sq(right) * nl, den: nl * nr }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Picks the candidate features considered at one node.
pub(crate) trait FeatureSampler {
    fn candidates(&mut self, n_features: usize) -> Vec<usize>;
}

pub(crate) struct AllFeatures;

impl FeatureSampler for AllFeatures {
    fn candidates(&mut self, n_features: usize) -> Vec<usize> {
        (0..n_features).collect()
    }
}

/// `k` distinct features per node, sorted ascending.
pub(crate) struct RandomSubset<R> {
    pub rng: R,
    pub k: usize,
}

impl<R: Rng> FeatureSampler for RandomSubset<R> {
    fn candidates(&mut self, n_features: usize) -> Vec<usize> {
        if self.k >= n_features {
            return (0..n_features).collect();
        }
        let mut f = rand::seq::index::sample(&mut self.rng, n_features, self.k).into_vec();
        f.sort_unstable();
        f
    }
}

fn class_counts(y: &[u8], rows: &[usize]) -> [usize; 2] {
    let ones = rows.iter().filter(|&&i| y[i] == 1).count();
    [rows.len() - ones, ones]
}

/// Best `(feature, threshold)` for `rows`, or `None` if no feature varies.
fn best_split(x: &Tensor, y: &[u8], rows: &[usize], features: &[usize]) -> Option<(usize, f64)> {
    let total = class_counts(y, rows);
    let mut best: Option<(Score, usize, f64)> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    for &f in features {
        column.clear();
        column.extend(rows.iter().map(|&i| (x.at(i, f), y[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for w in 0..column.len() - 1 {
            left[usize::from(column[w].1)] += 1;
            let (lo, hi) = (column[w].0, column[w + 1].0);
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = Score::new(left, right);
            if best.as_ref().is_none_or(|(b, _, _)| score.beats(b)) {
                best = Some((score, f, (lo + hi) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Majority class; ties go to class 1.
fn majority(counts: [usize; 2]) -> u8 {
    u8::from(counts[1] >= counts[0])
}

pub(crate) fn grow(x: &Tensor, y: &[u8], rows: Vec<usize>, sampler: &mut dyn FeatureSampler) -> CartTreeModel {
    let mut nodes = Vec::new();
    grow_node(x, y, rows, sampler, &mut nodes);
    CartTreeModel { nodes, n_features: x.cols() }
}

fn grow_node(
    x: &Tensor,
    y: &[u8],
    rows: Vec<usize>,
    sampler: &mut dyn FeatureSampler,
    nodes: &mut Vec<CartNode>,
) -> usize {
    let id = nodes.len();
    let counts = class_counts(y, &rows);
    nodes.push(CartNode::Leaf { class: majority(counts), counts });
    if rows.len() < 2 || counts[0] == 0 || counts[1] == 0 {
        return id;
    }
    let features = sampler.candidates(x.cols());
    let Some((feature, threshold)) = best_split(x, y, &rows, &features) else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.at(i, feature) <= threshold);
    let left = grow_node(x, y, l, sampler, nodes);
    let right = grow_node(x, y, r, sampler, nodes);
    nodes[id] = CartNode::Split { feature, threshold, left, right };
    id
}

impl CartTreeModel {
    pub fn fit(x: &Tensor, y: &[u8]) -> Result<Self> {
        check_training(x, y, "cart_fit")?;
        Ok(grow(x, y, (0..y.len()).collect(), &mut AllFeatures))
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                CartNode::Leaf { class, .. } => return class,
                CartNode::Split { feature, threshold, left, right } => {
                    id = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[CartNode], id: usize) -> usize {
            match nodes[id] {
                CartNode::Leaf { .. } => 0,
                CartNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Classifier for CartTreeModel {
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>> {
        check_width(x, self.n_features, "cart_predict")?;
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

pub fn cart_fit_predict(train_x: &Tensor, train_y: &[u8], x: &Tensor) -> Result<Vec<u8>> {
    CartTreeModel::fit(train_x, train_y)?.predict(x)
}
