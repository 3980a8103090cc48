//! Numeric self-checks: finite-difference gradients of every trainable
//! piece, leaf reach normalisation, forest averaging and the metric layout.

use std::collections::BTreeMap;

use dndf_core::forest::{batch_loss_and_grads, forest_forward, init_forest, ForestConfig};
use dndf_core::metrics::{report, round3, ConfusionMatrix};
use dndf_core::ndt::{init_tree, tree_forward, tree_grads, TreeConfig, TreeParams};
use dndf_core::numcore::kernels as k;
use dndf_core::numcore::{bce_loss, gradient_check, ParamStore};
use dndf_core::{seeded_rng, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RunError};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rand_t(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn worst_over(trials: u64, mut trial: impl FnMut(u64) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..trials {
        worst = worst.max(trial(s)?);
    }
    Ok(worst)
}

/// Finite-difference check of `f` over named inputs; returns the worst relative error.
fn fd<F>(inputs: Vec<(&str, Tensor)>, f: F) -> Result<f64>
where
    F: Fn(&[&Tensor]) -> dndf_core::Result<(f64, Vec<Tensor>)>,
{
    let names: Vec<String> = inputs.iter().map(|(n, _)| n.to_string()).collect();
    let mut store = ParamStore::new();
    for (n, t) in inputs {
        store.insert(n, t);
    }
    let r = gradient_check(
        |st| {
            let args: Vec<&Tensor> = names.iter().map(|n| st.get(n).unwrap()).collect();
            let (v, g) = f(&args)?;
            Ok((v, names.iter().cloned().zip(g).collect::<BTreeMap<_, _>>()))
        },
        &store,
        FD_STEP,
        FD_TOLERANCE,
    )?;
    Ok(r.max_rel_error())
}

type KernelTrial = fn(&mut ChaCha8Rng) -> Result<f64>;

fn dim(rng: &mut impl Rng) -> usize {
    rng.gen_range(1..5)
}

const KERNELS: [(&str, KernelTrial); 16] = [
    ("matmul", |rng| {
        let (m, p, n) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, n], -1.5, 1.5);
        let (a, b) = (rand_t(rng, &[m, p], -1.0, 1.0), rand_t(rng, &[p, n], -1.0, 1.0));
        fd(vec![("a", a), ("b", b)], |t| {
            let (ga, gb) = k::matmul_backward(t[0], t[1], &g)?;
            Ok((dot(&k::matmul(t[0], t[1])?, &g), vec![ga, gb]))
        })
    }),
    ("transpose", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[n, m], -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            Ok((dot(&k::transpose(t[0])?, &g), vec![k::transpose_backward(&g)?]))
        })
    }),
    ("add", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[m, n], -1.5, 1.5);
        let b_shape = if rng.gen_bool(0.5) { vec![n] } else { vec![m, n] };
        let (a, b) = (rand_t(rng, &[m, n], -1.0, 1.0), rand_t(rng, &b_shape, -1.0, 1.0));
        fd(vec![("a", a), ("b", b)], |t| {
            let (ga, gb) = k::add_backward(t[1].shape(), &g)?;
            Ok((dot(&k::add(t[0], t[1])?, &g), vec![ga, gb]))
        })
    }),
    ("mul", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let (a, b) = (rand_t(rng, &sh, -1.0, 1.0), rand_t(rng, &sh, -1.0, 1.0));
        fd(vec![("a", a), ("b", b)], |t| {
            let (ga, gb) = k::mul_backward(t[0], t[1], &g)?;
            Ok((dot(&k::mul(t[0], t[1])?, &g), vec![ga, gb]))
        })
    }),
    ("affine", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let (scale, shift) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
        fd(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| {
            Ok((dot(&k::affine(t[0], scale, shift), &g), vec![k::affine_backward(scale, &g)]))
        })
    }),
    ("sigmoid", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &sh, -4.0, 4.0))], |t| {
            let out = k::sigmoid(t[0]);
            Ok((dot(&out, &g), vec![k::sigmoid_backward(&out, &g)?]))
        })
    }),
    ("softmax_rows", |rng| {
        let sh = [dim(rng), rng.gen_range(2..5)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &sh, -2.0, 2.0))], |t| {
            let out = k::softmax_rows(t[0]);
            Ok((dot(&out, &g), vec![k::softmax_rows_backward(&out, &g)?]))
        })
    }),
    ("ln", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &sh, 0.2, 3.0))], |t| Ok((dot(&k::ln(t[0])?, &g), vec![k::ln_backward(t[0], &g)?])))
    }),
    ("clip", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let mut a = rand_t(rng, &sh, -1.0, 1.0);
        for v in a.data_mut() {
            if (v.abs() - 0.5).abs() < 0.01 {
                *v += 0.05;
            }
        }
        fd(vec![("a", a)], |t| Ok((dot(&k::clip(t[0], -0.5, 0.5), &g), vec![k::clip_backward(t[0], -0.5, 0.5, &g)?])))
    }),
    ("concat_last", |rng| {
        let (m, p, q) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, p + q], -1.5, 1.5);
        let (a, b) = (rand_t(rng, &[m, p], -1.0, 1.0), rand_t(rng, &[m, q], -1.0, 1.0));
        fd(vec![("a", a), ("b", b)], |t| {
            let (ga, gb) = k::concat_last_backward(p, &g)?;
            Ok((dot(&k::concat_last(t[0], t[1])?, &g), vec![ga, gb]))
        })
    }),
    ("reshape", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[m * n], -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            Ok((dot(&k::reshape(t[0], &[m * n])?, &g), vec![k::reshape_backward(&[m, n], &g)?]))
        })
    }),
    ("expand", |rng| {
        let (m, r, n) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, r, n], -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &[m, 1, n], -1.0, 1.0))], |t| {
            Ok((dot(&k::expand(t[0], 1, r)?, &g), vec![k::expand_backward(&[m, 1, n], 1, &g)?]))
        })
    }),
    ("slice_last", |rng| {
        let (m, n) = (dim(rng), rng.gen_range(2..6));
        let start = rng.gen_range(0..n);
        let end = rng.gen_range(start + 1..=n);
        let g = rand_t(rng, &[m, end - start], -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            Ok((dot(&k::slice_last(t[0], start, end)?, &g), vec![k::slice_last_backward(&[m, n], start, &g)?]))
        })
    }),
    ("select_last", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let idx: Vec<usize> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..n)).collect();
        let g = rand_t(rng, &[m, idx.len()], -1.5, 1.5);
        fd(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            Ok((dot(&k::select_last(t[0], &idx)?, &g), vec![k::select_last_backward(&[m, n], &idx, &g)?]))
        })
    }),
    ("sum/mean", |rng| {
        let sh = [dim(rng), dim(rng)];
        let c = rng.gen_range(0.5..2.0);
        let e1 =
            fd(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| Ok((c * k::sum(t[0]), vec![k::sum_backward(&sh, c)])))?;
        let e2 =
            fd(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| Ok((c * k::mean(t[0])?, vec![k::mean_backward(&sh, c)])))?;
        Ok(e1.max(e2))
    }),
    ("bce", |rng| {
        let n = rng.gen_range(1..8);
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        fd(vec![("p", rand_t(rng, &[n], 0.05, 0.95))], |t| {
            let out = bce_loss(t[0].data(), &y)?;
            Ok((out.loss, vec![Tensor::new(vec![n], out.grad)?]))
        })
    }),
];

/// Worst relative error of each numeric kernel over `trials` seeded draws.
pub fn kernel_gradients(trials: u64) -> Result<Vec<(&'static str, f64)>> {
    KERNELS
        .iter()
        .enumerate()
        .map(|(i, (name, trial))| {
            let worst = worst_over(trials, |s| trial(&mut seeded_rng(10_000 * (i as u64 + 1) + s)))?;
            Ok((*name, worst))
        })
        .collect()
}

fn random_tree(rng: &mut impl Rng, depth: usize, n_features: usize, rate: f64) -> Result<TreeParams> {
    let cfg = TreeConfig { depth, used_features_rate: rate, ..TreeConfig::new(n_features, rng.gen()) };
    let mut p = init_tree(&cfg)?;
    p.w = rand_t(rng, p.w.shape(), -1.5, 1.5);
    p.b = rand_t(rng, p.b.shape(), -1.0, 1.0);
    p.pi_logits = rand_t(rng, p.pi_logits.shape(), -2.0, 2.0);
    Ok(p)
}

/// Worst relative error of a depth-3 tree's BCE gradient over `trials` draws.
pub fn tree_gradients(trials: u64) -> Result<f64> {
    worst_over(trials, |s| {
        let mut rng = seeded_rng(200_000 + s);
        let tree = random_tree(&mut rng, 3, 4, if s % 2 == 0 { 1.0 } else { 0.5 })?;
        let x = rand_t(&mut rng, &[6, 4], 0.0, 1.0);
        let y: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2)).collect();
        let mut st = ParamStore::new();
        st.insert("w", tree.w.clone());
        st.insert("b", tree.b.clone());
        st.insert("pi", tree.pi_logits.clone());
        let r = gradient_check(
            |st| {
                let mut p = tree.clone();
                p.w = st.get("w").unwrap().clone();
                p.b = st.get("b").unwrap().clone();
                p.pi_logits = st.get("pi").unwrap().clone();
                let (loss, g) = tree_grads(&p, &x, &y)?;
                Ok((loss, BTreeMap::from([("w".into(), g.w), ("b".into(), g.b), ("pi".into(), g.pi_logits)])))
            },
            &st,
            FD_STEP,
            FD_TOLERANCE,
        )?;
        Ok(r.max_rel_error())
    })
}

/// Worst relative error of a two-tree depth-2 forest's batch gradient.
pub fn forest_gradients(trials: u64) -> Result<f64> {
    worst_over(trials, |s| {
        let mut rng = seeded_rng(300_000 + s);
        let cfg = ForestConfig { num_trees: 2, depth: 2, used_features_rate: 1.0, ..ForestConfig::new(3, rng.gen()) };
        let m = init_forest(&cfg)?;
        let masks = m.masks();
        let mut store = ParamStore::new();
        for (name, p) in m.to_param_store().iter() {
            let (lo, hi) = if name.ends_with("pi_logits") { (-2.0, 2.0) } else { (-1.5, 1.5) };
            store.insert(name, rand_t(&mut rng, p.value.shape(), lo, hi));
        }
        let x = rand_t(&mut rng, &[5, 3], 0.0, 1.0);
        let y: Vec<u8> = (0..5).map(|_| rng.gen_range(0..2)).collect();
        let r = gradient_check(|st| batch_loss_and_grads(&masks, 3, st, &x, &y), &store, FD_STEP, FD_TOLERANCE)?;
        Ok(r.max_rel_error())
    })
}

/// Largest `|Σ μ − 1|` over `pairs` random (tree, row) pairs at depths 1 to 10.
pub fn leaf_reach_deviation(pairs: u64) -> Result<f64> {
    let mut rng = seeded_rng(400_000);
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let depth = 1 + (i % 10) as usize;
        let n_features = rng.gen_range(1..6);
        let cfg = TreeConfig { depth, used_features_rate: rng.gen_range(0.2..=1.0), ..TreeConfig::new(n_features, i) };
        let mut p = init_tree(&cfg)?;
        let scale = rng.gen_range(0.1..5.0);
        for v in p.w.data_mut().iter_mut().chain(p.b.data_mut()) {
            *v = rng.gen_range(-scale..scale);
        }
        let row: Vec<f64> = (0..n_features).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let (mu, _) = tree_forward(&p, &Tensor::from_rows(&[row])?)?;
        if mu.data().iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max((mu.data().iter().sum::<f64>() - 1.0).abs());
    }
    Ok(worst)
}

/// Whether forests of identical trees reproduce the single tree bit for bit.
pub fn cloned_forest_is_exact(tree_counts: &[usize]) -> Result<bool> {
    let mut rng = seeded_rng(500_000);
    for &n in tree_counts {
        let cfg = ForestConfig { num_trees: n, depth: 4, ..ForestConfig::new(6, 3) };
        let mut m = init_forest(&cfg)?;
        let mut first = m.trees[0].clone();
        first.w = rand_t(&mut rng, first.w.shape(), -2.0, 2.0);
        first.pi_logits = rand_t(&mut rng, first.pi_logits.shape(), -2.0, 2.0);
        m.trees = vec![first.clone(); n];
        let x = rand_t(&mut rng, &[9, 6], 0.0, 1.0);
        let (_, single) = tree_forward(&first, &x)?;
        let forest = forest_forward(&m, &x)?;
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&forest) != bits(&single) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: e.to_string() },
    }
}

/// Runs every check with `trials` gradient draws each.
pub fn run_checks(trials: u64) -> Vec<CheckOutcome> {
    let grad = |f: fn(u64) -> Result<f64>| {
        f(trials).map(|e| (e < FD_TOLERANCE, format!("{trials} trials, worst relative error {e:.2e}")))
    };
    vec![
        outcome(
            "kernel gradients",
            kernel_gradients(trials).map(|errs| {
                let (name, worst) = errs.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
                (
                    worst < FD_TOLERANCE,
                    format!("{} kernels, {trials} trials each, worst relative error {worst:.2e} ({name})", errs.len()),
                )
            }),
        ),
        outcome("tree gradients", grad(tree_gradients)),
        outcome("forest gradients", grad(forest_gradients)),
        outcome(
            "leaf reach sums to one",
            leaf_reach_deviation(1000).map(|d| (d < 1e-9, format!("1000 pairs, worst deviation {d:.2e}"))),
        ),
        outcome(
            "forest of identical trees",
            cloned_forest_is_exact(&[2, 3, 7, 25]).map(|ok| (ok, "2, 3, 7 and 25 trees".to_string())),
        ),
        outcome(
            "metric layout",
            report(&ConfusionMatrix { tn: 405, fp: 31, fn_: 96, tp: 43 }).map_err(RunError::from).map(|r| {
                let got = [r.accuracy, r.weighted_recall, r.weighted_precision, r.weighted_f1].map(round3);
                (got == [0.779, 0.779, 0.753, 0.753], format!("{got:?}"))
            }),
        ),
    ]
}
