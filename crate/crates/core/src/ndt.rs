//! A single soft decision tree.
//!
//! Internal nodes are indexed breadth-first, so level `l` holds nodes
//! `2^l − 1 .. 2^(l+1) − 1`. Node `n` sends an input left with probability
//! `d_n = sigmoid(w_n · x[mask] + b_n)`. The probability `mu` of reaching
//! each leaf is built one level at a time: every entry of the current
//! level is expanded into a (left, right) pair and multiplied by
//! `(d, 1 − d)`. The class distribution is `mu · softmax(pi_logits)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::{bce_loss, kernels as k, Tensor};
use crate::{seeded_rng, Error, Result};

/// Uniform initialisation half-width for routing weights and biases.
pub const INIT_SCALE: f64 = 0.05;
pub const MAX_DEPTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub depth: usize,
    pub used_features_rate: f64,
    pub n_features: usize,
    pub seed: u64,
}

impl TreeConfig {
    pub fn new(n_features: usize, seed: u64) -> Self {
        TreeConfig { depth: 10, used_features_rate: 1.0, n_features, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features < 1 {
            return Err(Error::Validation(format!("tree needs at least one feature, got {}", self.n_features)));
        }
        if self.depth < 1 || self.depth > MAX_DEPTH {
            return Err(Error::Validation(format!("tree depth {} not in 1..={MAX_DEPTH}", self.depth)));
        }
        if !(self.used_features_rate > 0.0 && self.used_features_rate <= 1.0) {
            return Err(Error::Validation(format!("used_features_rate {} not in (0, 1]", self.used_features_rate)));
        }
        Ok(())
    }

    pub fn n_used(&self) -> usize {
        let r = libm::round(self.used_features_rate * self.n_features as f64) as usize;
        r.clamp(1, self.n_features.max(1))
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn n_internal(&self) -> usize {
        self.n_leaves() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Sorted, distinct input columns this tree routes on.
    pub feature_mask: Vec<usize>,
    /// Width of the input the mask indexes into.
    pub n_features: usize,
    /// Routing weights, `[internal × n_used]`.
    pub w: Tensor,
    /// Routing biases, `[internal]`.
    pub b: Tensor,
    /// Leaf class logits, `[leaves × 2]`.
    pub pi_logits: Tensor,
}

impl TreeParams {
    pub fn depth(&self) -> usize {
        self.pi_logits.shape()[0].trailing_zeros() as usize
    }

    pub fn n_leaves(&self) -> usize {
        self.pi_logits.shape()[0]
    }

    pub fn view(&self) -> TreeView<'_> {
        TreeView {
            feature_mask: &self.feature_mask,
            n_features: self.n_features,
            w: &self.w,
            b: &self.b,
            pi_logits: &self.pi_logits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.view().validate()
    }
}

/// Borrowed tree parameters; lets training keep the tensors in a
/// `ParamStore` while the mask stays with the tree.
#[derive(Debug, Clone, Copy)]
pub struct TreeView<'a> {
    pub feature_mask: &'a [usize],
    pub n_features: usize,
    pub w: &'a Tensor,
    pub b: &'a Tensor,
    pub pi_logits: &'a Tensor,
}

impl TreeView<'_> {
    fn validate(&self) -> Result<()> {
        let leaves = self.pi_logits.shape().first().copied().unwrap_or(0);
        let internal = leaves.wrapping_sub(1);
        let u = self.feature_mask.len();
        let mask_ok = u >= 1
            && self.feature_mask.windows(2).all(|p| p[0] < p[1])
            && self.feature_mask.iter().all(|&i| i < self.n_features);
        let shapes_ok = leaves >= 2
            && leaves.is_power_of_two()
            && self.pi_logits.shape() == [leaves, 2]
            && self.w.shape() == [internal, u]
            && self.b.shape() == [internal];
        if mask_ok && shapes_ok {
            Ok(())
        } else {
            Err(Error::Shape {
                op: "tree_params",
                detail: format!(
                    "mask {:?} over {} features, w {:?}, b {:?}, pi {:?}",
                    self.feature_mask,
                    self.n_features,
                    self.w.shape(),
                    self.b.shape(),
                    self.pi_logits.shape()
                ),
            })
        }
    }
}

pub fn init_tree(cfg: &TreeConfig) -> Result<TreeParams> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let n_used = cfg.n_used();
    let mut mask = rand::seq::index::sample(&mut rng, cfg.n_features, n_used).into_vec();
    mask.sort_unstable();
    let internal = cfg.n_internal();
    let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE)).collect() };
    let w = Tensor::new(alloc::vec![internal, n_used], uniform(internal * n_used))?;
    let b = Tensor::new(alloc::vec![internal], uniform(internal))?;
    let pi_logits = Tensor::zeros(&[cfg.n_leaves(), 2]);
    Ok(TreeParams { feature_mask: mask, n_features: cfg.n_features, w, b, pi_logits })
}

/// Intermediate values of one forward pass, kept for the backward pass.
pub struct TreeTape {
    xm: Tensor,
    d: Tensor,
    /// Reach probability of every node, heap order, `[batch × (2·leaves − 1)]`.
    reach: Tensor,
    pub mu: Tensor,
    pi: Tensor,
    pub prob: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeGrads {
    pub w: Tensor,
    pub b: Tensor,
    pub pi_logits: Tensor,
}

fn check_input(p: &TreeView<'_>, x: &Tensor) -> Result<()> {
    p.validate()?;
    if x.ndim() != 2 || x.cols() != p.n_features {
        return Err(Error::Shape {
            op: "tree_forward",
            detail: format!("input {:?}, tree expects {} features", x.shape(), p.n_features),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyInput("tree_forward batch"));
    }
    Ok(())
}

pub fn forward_tape(p: TreeView<'_>, x: &Tensor) -> Result<TreeTape> {
    check_input(&p, x)?;
    let batch = x.rows();
    let u = p.feature_mask.len();
    let leaves = p.pi_logits.shape()[0];
    let internal = leaves - 1;
    let nodes = 2 * leaves - 1;
    let xm = k::select_last(x, p.feature_mask)?;
    let pi = k::softmax_rows(p.pi_logits);
    let (w, b, pi_d) = (p.w.data(), p.b.data(), pi.data());

    let mut d = vec![0.0; batch * internal];
    let mut reach = vec![0.0; batch * nodes];
    let mut mu = vec![0.0; batch * leaves];
    let mut prob = vec![0.0; batch * 2];
    for i in 0..batch {
        let xi = xm.row(i);
        let di = &mut d[i * internal..(i + 1) * internal];
        for (n, dn) in di.iter_mut().enumerate() {
            let s: f64 = xi.iter().zip(&w[n * u..(n + 1) * u]).map(|(a, b)| a * b).sum();
            *dn = k::sigmoid_scalar(s + b[n]);
        }
        let ri = &mut reach[i * nodes..(i + 1) * nodes];
        ri[0] = 1.0;
        for n in 0..internal {
            let (r, dn) = (ri[n], di[n]);
            ri[2 * n + 1] = r * dn;
            ri[2 * n + 2] = r * (1.0 - dn);
        }
        let mi = &mut mu[i * leaves..(i + 1) * leaves];
        mi.copy_from_slice(&ri[internal..]);
        let (mut p0, mut p1) = (0.0, 0.0);
        for (l, m) in mi.iter().enumerate() {
            p0 += m * pi_d[2 * l];
            p1 += m * pi_d[2 * l + 1];
        }
        prob[2 * i] = p0;
        prob[2 * i + 1] = p1;
    }
    Ok(TreeTape {
        xm,
        d: Tensor::new(vec![batch, internal], d)?,
        reach: Tensor::new(vec![batch, nodes], reach)?,
        mu: Tensor::new(vec![batch, leaves], mu)?,
        pi,
        prob: Tensor::new(vec![batch, 2], prob)?,
    })
}

/// Reverse pass from an upstream gradient on `prob` (`[batch × 2]`).
pub fn backward(p: TreeView<'_>, tape: &TreeTape, grad_prob: &Tensor) -> Result<TreeGrads> {
    tape.prob.same_shape(grad_prob, "tree_backward")?;
    let batch = tape.prob.rows();
    let u = tape.xm.cols();
    let leaves = tape.mu.cols();
    let internal = leaves - 1;
    let nodes = 2 * leaves - 1;
    let pi = tape.pi.data();

    let mut g_pi = vec![0.0; leaves * 2];
    let mut g_w = vec![0.0; internal * u];
    let mut g_b = vec![0.0; internal];
    let mut g_reach = vec![0.0; nodes];
    for i in 0..batch {
        let (g0, g1) = (grad_prob.at(i, 0), grad_prob.at(i, 1));
        let mi = tape.mu.row(i);
        for l in 0..leaves {
            g_pi[2 * l] += mi[l] * g0;
            g_pi[2 * l + 1] += mi[l] * g1;
            g_reach[internal + l] = g0 * pi[2 * l] + g1 * pi[2 * l + 1];
        }
        let ri = tape.reach.row(i);
        let di = tape.d.row(i);
        let xi = tape.xm.row(i);
        for n in (0..internal).rev() {
            let (gl, gr, dn) = (g_reach[2 * n + 1], g_reach[2 * n + 2], di[n]);
            g_reach[n] = gl * dn + gr * (1.0 - dn);
            let g_logit = ri[n] * (gl - gr) * dn * (1.0 - dn);
            g_b[n] += g_logit;
            for (gw, xj) in g_w[n * u..(n + 1) * u].iter_mut().zip(xi) {
                *gw += g_logit * xj;
            }
        }
    }
    let g_pi = Tensor::new(vec![leaves, 2], g_pi)?;
    let g_pi_logits = k::softmax_rows_backward(&tape.pi, &g_pi)?;
    Ok(TreeGrads {
        w: Tensor::new(p.w.shape().to_vec(), g_w)?,
        b: Tensor::new(vec![internal], g_b)?,
        pi_logits: g_pi_logits,
    })
}

/// The same forward pass written as a composition of `numcore` kernels.
/// Slow; used to cross-check `forward_tape`.
pub fn reference_forward(p: &TreeParams, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let p = p.view();
    check_input(&p, x)?;
    let batch = x.rows();
    let xm = k::select_last(x, p.feature_mask)?;
    let logits = k::add(&k::matmul(&xm, &k::transpose(p.w)?)?, p.b)?;
    let d = k::sigmoid(&logits);
    let depth = p.pi_logits.shape()[0].trailing_zeros() as usize;
    let mut mu = Tensor::full(&[batch, 1], 1.0);
    for level in 0..depth {
        let width = 1usize << level;
        let d_level = k::reshape(&k::slice_last(&d, width - 1, 2 * width - 1)?, &[batch, width, 1])?;
        let pair = k::concat_last(&d_level, &k::affine(&d_level, -1.0, 1.0))?;
        let mu_expanded = k::expand(&k::reshape(&mu, &[batch, width, 1])?, 2, 2)?;
        mu = k::reshape(&k::mul(&mu_expanded, &pair)?, &[batch, 2 * width])?;
    }
    let prob = k::matmul(&mu, &k::softmax_rows(p.pi_logits))?;
    Ok((mu, prob))
}

/// Leaf-reach probabilities `[batch × leaves]` and class probabilities `[batch × 2]`.
pub fn tree_forward(p: &TreeParams, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let tape = forward_tape(p.view(), x)?;
    Ok((tape.mu, tape.prob))
}

/// Mean BCE of `prob[:, 1]` against `y`, and its gradient.
pub fn tree_grads(p: &TreeParams, x: &Tensor, y: &[u8]) -> Result<(f64, TreeGrads)> {
    let tape = forward_tape(p.view(), x)?;
    let p1: Vec<f64> = (0..tape.prob.rows()).map(|i| tape.prob.at(i, 1)).collect();
    let bce = bce_loss(&p1, y)?;
    let mut grad_prob = Tensor::zeros(tape.prob.shape());
    for (i, g) in bce.grad.iter().enumerate() {
        grad_prob.row_mut(i)[1] = *g;
    }
    let grads = backward(p.view(), &tape, &grad_prob)?;
    Ok((bce.loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_ten_shapes() {
        let p = init_tree(&TreeConfig::new(9, 1)).unwrap();
        assert_eq!(p.pi_logits.shape(), [1024, 2]);
        assert_eq!(p.w.shape(), [1023, 9]);
        assert_eq!(p.b.shape(), [1023]);
        assert_eq!(p.depth(), 10);
    }

    #[test]
    fn full_rate_uses_every_feature() {
        let p = init_tree(&TreeConfig { depth: 2, ..TreeConfig::new(9, 3) }).unwrap();
        assert_eq!(p.feature_mask, (0..9).collect::<Vec<_>>());
        let half = init_tree(&TreeConfig { depth: 2, used_features_rate: 0.5, ..TreeConfig::new(9, 3) }).unwrap();
        assert_eq!(half.feature_mask.len(), 5);
    }

    #[test]
    fn init_is_deterministic_and_small() {
        let cfg = TreeConfig { depth: 4, ..TreeConfig::new(5, 11) };
        let a = init_tree(&cfg).unwrap();
        assert_eq!(a, init_tree(&cfg).unwrap());
        assert!(a.w.data().iter().chain(a.b.data()).all(|v| v.abs() <= INIT_SCALE));
        assert!(a.pi_logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_features_rejected() {
        assert!(matches!(init_tree(&TreeConfig::new(0, 1)), Err(Error::Validation(_))));
    }

    #[test]
    fn depth_one_symmetric() {
        let mut p = init_tree(&TreeConfig { depth: 1, ..TreeConfig::new(2, 0) }).unwrap();
        p.w = Tensor::zeros(&[1, 2]);
        p.b = Tensor::zeros(&[1]);
        let x = Tensor::from_rows(&[[0.3, 0.9]]).unwrap();
        let (mu, prob) = tree_forward(&p, &x).unwrap();
        assert_eq!(mu.data(), &[0.5, 0.5]);
        assert_eq!(prob.data(), &[0.5, 0.5]);
    }

    #[test]
    fn wrong_width_is_a_shape_error() {
        let p = init_tree(&TreeConfig { depth: 2, ..TreeConfig::new(3, 0) }).unwrap();
        let x = Tensor::zeros(&[2, 4]);
        assert!(matches!(tree_forward(&p, &x), Err(Error::Shape { .. })));
    }
}
