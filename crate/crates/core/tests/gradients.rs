use std::collections::BTreeMap;

use dndf_core::forest::{batch_loss_and_grads, init_forest, ForestConfig};
use dndf_core::ndt::{backward, forward_tape, init_tree, reference_forward, tree_grads, TreeConfig, TreeParams};
use dndf_core::numcore::kernels as k;
use dndf_core::numcore::{bce_loss, gradient_check, ParamStore};
use dndf_core::{seeded_rng, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const TRIALS: u64 = 100;

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Gradient-checks `f` over named inputs and returns the worst relative error.
fn check<F>(inputs: Vec<(&str, Tensor)>, f: F) -> f64
where
    F: Fn(&[&Tensor]) -> (f64, Vec<Tensor>),
{
    let names: Vec<String> = inputs.iter().map(|(n, _)| n.to_string()).collect();
    let mut store = ParamStore::new();
    for (n, t) in inputs {
        store.insert(n, t);
    }
    let report = gradient_check(
        |s: &ParamStore| {
            let args: Vec<&Tensor> = names.iter().map(|n| s.get(n).unwrap()).collect();
            let (v, g) = f(&args);
            Ok((v, names.iter().cloned().zip(g).collect::<BTreeMap<_, _>>()))
        },
        &store,
        STEP,
        TOL,
    )
    .unwrap();
    report.max_rel_error()
}

/// Runs `trial` for every seed and asserts the worst error stays under tolerance.
fn over_seeds(label: &str, trial: impl Fn(&mut ChaCha8Rng) -> f64) {
    let worst = (0..TRIALS).map(|s| trial(&mut seeded_rng(1000 + s))).fold(0.0, f64::max);
    assert!(worst < TOL, "{label}: worst relative error {worst:e}");
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..5)
}

#[test]
fn matmul_gradient() {
    over_seeds("matmul", |rng| {
        let (m, kk, n) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, n], -1.5, 1.5);
        let a = rand_t(rng, &[m, kk], -1.0, 1.0);
        let b = rand_t(rng, &[kk, n], -1.0, 1.0);
        check(vec![("a", a), ("b", b)], |t| {
            let out = k::matmul(t[0], t[1]).unwrap();
            let (ga, gb) = k::matmul_backward(t[0], t[1], &g).unwrap();
            (dot(&out, &g), vec![ga, gb])
        })
    });
}

#[test]
fn matmul_two_by_three_example() {
    let a = Tensor::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]).unwrap();
    let b = Tensor::from_rows(&[[0.3], [-0.7], [1.1]]).unwrap();
    let g = Tensor::from_rows(&[[1.0], [-2.0]]).unwrap();
    let err = check(vec![("a", a), ("b", b)], |t| {
        let out = k::matmul(t[0], t[1]).unwrap();
        let (ga, gb) = k::matmul_backward(t[0], t[1], &g).unwrap();
        (dot(&out, &g), vec![ga, gb])
    });
    assert!(err < TOL);
}

#[test]
fn transpose_gradient() {
    over_seeds("transpose", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[n, m], -1.5, 1.5);
        check(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            let out = k::transpose(t[0]).unwrap();
            (dot(&out, &g), vec![k::transpose_backward(&g).unwrap()])
        })
    });
}

#[test]
fn add_broadcast_gradient() {
    over_seeds("add", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[m, n], -1.5, 1.5);
        let b_shape: Vec<usize> = if rng.gen_bool(0.5) { vec![n] } else { vec![m, n] };
        let a = rand_t(rng, &[m, n], -1.0, 1.0);
        let b = rand_t(rng, &b_shape, -1.0, 1.0);
        check(vec![("a", a), ("b", b)], |t| {
            let out = k::add(t[0], t[1]).unwrap();
            let (ga, gb) = k::add_backward(t[1].shape(), &g).unwrap();
            (dot(&out, &g), vec![ga, gb])
        })
    });
}

#[test]
fn mul_gradient() {
    over_seeds("mul", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let a = rand_t(rng, &sh, -1.0, 1.0);
        let b = rand_t(rng, &sh, -1.0, 1.0);
        check(vec![("a", a), ("b", b)], |t| {
            let out = k::mul(t[0], t[1]).unwrap();
            let (ga, gb) = k::mul_backward(t[0], t[1], &g).unwrap();
            (dot(&out, &g), vec![ga, gb])
        })
    });
}

#[test]
fn affine_gradient() {
    over_seeds("affine", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let (scale, shift) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
        check(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| {
            let out = k::affine(t[0], scale, shift);
            (dot(&out, &g), vec![k::affine_backward(scale, &g)])
        })
    });
}

#[test]
fn sigmoid_gradient() {
    over_seeds("sigmoid", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        check(vec![("a", rand_t(rng, &sh, -4.0, 4.0))], |t| {
            let out = k::sigmoid(t[0]);
            (dot(&out, &g), vec![k::sigmoid_backward(&out, &g).unwrap()])
        })
    });
}

#[test]
fn softmax_gradient() {
    over_seeds("softmax_rows", |rng| {
        let sh = [dim(rng), rng.gen_range(2..5)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        check(vec![("a", rand_t(rng, &sh, -2.0, 2.0))], |t| {
            let out = k::softmax_rows(t[0]);
            (dot(&out, &g), vec![k::softmax_rows_backward(&out, &g).unwrap()])
        })
    });
}

#[test]
fn ln_gradient() {
    over_seeds("ln", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        check(vec![("a", rand_t(rng, &sh, 0.2, 3.0))], |t| {
            let out = k::ln(t[0]).unwrap();
            (dot(&out, &g), vec![k::ln_backward(t[0], &g).unwrap()])
        })
    });
}

#[test]
fn clip_gradient() {
    over_seeds("clip", |rng| {
        let sh = [dim(rng), dim(rng)];
        let g = rand_t(rng, &sh, -1.5, 1.5);
        let mut a = rand_t(rng, &sh, -1.0, 1.0);
        // Keep inputs away from the kinks.
        for v in a.data_mut() {
            if (v.abs() - 0.5).abs() < 0.01 {
                *v += 0.05;
            }
        }
        check(vec![("a", a)], |t| {
            let out = k::clip(t[0], -0.5, 0.5);
            (dot(&out, &g), vec![k::clip_backward(t[0], -0.5, 0.5, &g).unwrap()])
        })
    });
}

#[test]
fn concat_gradient() {
    over_seeds("concat_last", |rng| {
        let (m, p, q) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, p + q], -1.5, 1.5);
        let a = rand_t(rng, &[m, p], -1.0, 1.0);
        let b = rand_t(rng, &[m, q], -1.0, 1.0);
        check(vec![("a", a), ("b", b)], |t| {
            let out = k::concat_last(t[0], t[1]).unwrap();
            let (ga, gb) = k::concat_last_backward(p, &g).unwrap();
            (dot(&out, &g), vec![ga, gb])
        })
    });
}

#[test]
fn reshape_gradient() {
    over_seeds("reshape", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let g = rand_t(rng, &[m * n], -1.5, 1.5);
        check(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            let out = k::reshape(t[0], &[m * n]).unwrap();
            (dot(&out, &g), vec![k::reshape_backward(&[m, n], &g).unwrap()])
        })
    });
}

#[test]
fn expand_gradient() {
    over_seeds("expand", |rng| {
        let (m, r, n) = (dim(rng), dim(rng), dim(rng));
        let g = rand_t(rng, &[m, r, n], -1.5, 1.5);
        check(vec![("a", rand_t(rng, &[m, 1, n], -1.0, 1.0))], |t| {
            let out = k::expand(t[0], 1, r).unwrap();
            (dot(&out, &g), vec![k::expand_backward(&[m, 1, n], 1, &g).unwrap()])
        })
    });
}

#[test]
fn slice_gradient() {
    over_seeds("slice_last", |rng| {
        let (m, n) = (dim(rng), rng.gen_range(2..6));
        let start = rng.gen_range(0..n);
        let end = rng.gen_range(start + 1..=n);
        let g = rand_t(rng, &[m, end - start], -1.5, 1.5);
        check(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            let out = k::slice_last(t[0], start, end).unwrap();
            (dot(&out, &g), vec![k::slice_last_backward(&[m, n], start, &g).unwrap()])
        })
    });
}

#[test]
fn select_gradient() {
    over_seeds("select_last", |rng| {
        let (m, n) = (dim(rng), dim(rng));
        let idx: Vec<usize> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..n)).collect();
        let g = rand_t(rng, &[m, idx.len()], -1.5, 1.5);
        check(vec![("a", rand_t(rng, &[m, n], -1.0, 1.0))], |t| {
            let out = k::select_last(t[0], &idx).unwrap();
            (dot(&out, &g), vec![k::select_last_backward(&[m, n], &idx, &g).unwrap()])
        })
    });
}

#[test]
fn sum_and_mean_gradient() {
    over_seeds("sum/mean", |rng| {
        let sh = [dim(rng), dim(rng)];
        let c = rng.gen_range(0.5..2.0);
        let e1 = check(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| (c * k::sum(t[0]), vec![k::sum_backward(&sh, c)]));
        let e2 = check(vec![("a", rand_t(rng, &sh, -1.0, 1.0))], |t| {
            (c * k::mean(t[0]).unwrap(), vec![k::mean_backward(&sh, c)])
        });
        e1.max(e2)
    });
}

#[test]
fn bce_gradient() {
    over_seeds("bce", |rng| {
        let n = rng.gen_range(1..8);
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        check(vec![("p", rand_t(rng, &[n], 0.05, 0.95))], |t| {
            let out = bce_loss(t[0].data(), &y).unwrap();
            (out.loss, vec![Tensor::new(vec![n], out.grad).unwrap()])
        })
    });
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize, n_features: usize, rate: f64) -> TreeParams {
    let cfg = TreeConfig { depth, used_features_rate: rate, ..TreeConfig::new(n_features, rng.gen()) };
    let mut p = init_tree(&cfg).unwrap();
    p.w = rand_t(rng, p.w.shape(), -1.5, 1.5);
    p.b = rand_t(rng, p.b.shape(), -1.0, 1.0);
    p.pi_logits = rand_t(rng, p.pi_logits.shape(), -2.0, 2.0);
    p
}

fn batch(rng: &mut ChaCha8Rng, rows: usize, n_features: usize) -> (Tensor, Vec<u8>) {
    let x = rand_t(rng, &[rows, n_features], 0.0, 1.0);
    let y = (0..rows).map(|_| rng.gen_range(0..2)).collect();
    (x, y)
}

#[test]
fn depth_three_tree_gradient() {
    over_seeds("tree", |rng| {
        let rate = if rng.gen_bool(0.5) { 1.0 } else { 0.5 };
        let tree = random_tree(rng, 3, 4, rate);
        let (x, y) = batch(rng, 6, 4);
        let inputs = vec![("w", tree.w.clone()), ("b", tree.b.clone()), ("pi", tree.pi_logits.clone())];
        check(inputs, |t| {
            let mut p = tree.clone();
            p.w = t[0].clone();
            p.b = t[1].clone();
            p.pi_logits = t[2].clone();
            let (loss, g) = tree_grads(&p, &x, &y).unwrap();
            (loss, vec![g.w, g.b, g.pi_logits])
        })
    });
}

#[test]
fn two_tree_forest_gradient() {
    over_seeds("forest", |rng| {
        let cfg = ForestConfig { num_trees: 2, depth: 2, used_features_rate: 1.0, ..ForestConfig::new(3, rng.gen()) };
        let m = init_forest(&cfg).unwrap();
        let masks = m.masks();
        let mut store = ParamStore::new();
        for (name, p) in m.to_param_store().iter() {
            let (lo, hi) = if name.ends_with("pi_logits") { (-2.0, 2.0) } else { (-1.5, 1.5) };
            store.insert(name, rand_t(rng, p.value.shape(), lo, hi));
        }
        let (x, y) = batch(rng, 5, 3);
        let report = gradient_check(|s| batch_loss_and_grads(&masks, 3, s, &x, &y), &store, STEP, TOL).unwrap();
        assert_eq!(report.params.len(), 6);
        report.max_rel_error()
    });
}

#[test]
fn forest_gradient_is_tree_chain_over_tree_count() {
    let mut rng = seeded_rng(5);
    let cfg = ForestConfig { num_trees: 2, depth: 2, used_features_rate: 1.0, ..ForestConfig::new(3, 9) };
    let mut m = init_forest(&cfg).unwrap();
    for t in &mut m.trees {
        t.w = rand_t(&mut rng, t.w.shape(), -1.5, 1.5);
        t.pi_logits = rand_t(&mut rng, t.pi_logits.shape(), -2.0, 2.0);
    }
    let (x, y) = batch(&mut rng, 4, 3);
    let (_, grads) = batch_loss_and_grads(&m.masks(), 3, &m.to_param_store(), &x, &y).unwrap();

    // Chain rule by hand: dL/dprob_t = dL/dmean · 1/T.
    let tapes: Vec<_> = m.trees.iter().map(|t| forward_tape(t.view(), &x).unwrap()).collect();
    let mean1: Vec<f64> = (0..4).map(|i| (tapes[0].prob.at(i, 1) + tapes[1].prob.at(i, 1)) / 2.0).collect();
    let bce = bce_loss(&mean1, &y).unwrap();
    let mut gp = Tensor::zeros(&[4, 2]);
    for i in 0..4 {
        gp.row_mut(i)[1] = bce.grad[i] / 2.0;
    }
    for (t, tree) in m.trees.iter().enumerate() {
        let g = backward(tree.view(), &tapes[t], &gp).unwrap();
        for (name, expect) in [("w", &g.w), ("b", &g.b), ("pi_logits", &g.pi_logits)] {
            let got = &grads[&format!("tree{t:03}.{name}")];
            for (a, b) in got.data().iter().zip(expect.data()) {
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{name}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn symmetric_tree_has_zero_bias_gradient() {
    let mut p = init_tree(&TreeConfig { depth: 3, ..TreeConfig::new(2, 4) }).unwrap();
    p.w = Tensor::zeros(p.w.shape());
    p.b = Tensor::zeros(p.b.shape());
    let x = Tensor::from_rows(&[[0.1, 0.9], [0.7, 0.2], [0.4, 0.4], [0.8, 0.6]]).unwrap();
    let y = [0, 1, 1, 0];
    let (_, g) = tree_grads(&p, &x, &y).unwrap();
    assert!(g.b.data().iter().all(|&v| v == 0.0));
    // Finite differences agree that the bias direction is flat.
    for n in 0..p.b.len() {
        let mut plus = p.clone();
        plus.b.data_mut()[n] += 1e-5;
        let mut minus = p.clone();
        minus.b.data_mut()[n] -= 1e-5;
        let fd = (tree_grads(&plus, &x, &y).unwrap().0 - tree_grads(&minus, &x, &y).unwrap().0) / 2e-5;
        assert!(fd.abs() < 1e-9, "node {n}: {fd}");
    }
}

#[test]
fn fused_forward_matches_kernel_composition() {
    let mut rng = seeded_rng(77);
    for depth in 1..=6 {
        let tree = random_tree(&mut rng, depth, 5, 0.6);
        let (x, _) = batch(&mut rng, 7, 5);
        let tape = forward_tape(tree.view(), &x).unwrap();
        let (mu, prob) = reference_forward(&tree, &x).unwrap();
        for (a, b) in tape.mu.data().iter().zip(mu.data()).chain(tape.prob.data().iter().zip(prob.data())) {
            assert!((a - b).abs() < 1e-14, "depth {depth}: {a} vs {b}");
        }
    }
}
