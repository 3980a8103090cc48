//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dndf::check::{
    cloned_forest_is_exact, forest_gradients, kernel_gradients, leaf_reach_deviation, tree_gradients, FD_TOLERANCE,
};
use dndf::config::{ExperimentConfig, ModelKind, NeuralParams};
use dndf::model_io::{model_from_bytes, model_to_bytes};
use dndf::runner::{prepare_data, run_all, run_stage, MANIFEST_FILE};
use dndf_core::baselines::{stage_weight, CartTreeModel, Classifier, GaussianNBModel, KnnModel};
use dndf_core::dataset::{generate_synthetic, SyntheticCohortSpec};
use dndf_core::forest::{forest_forward, init_forest, ForestConfig};
use dndf_core::metrics::{report, round3, ConfusionMatrix};
use dndf_core::ndt::{init_tree, tree_forward};
use dndf_core::preprocess::{encode_features, select_by_frequency, stage_view, stratified_split, Stage};
use dndf_core::{seeded_rng, Tensor};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn metric_oracle() -> Outcome {
    let weighted = |tn, fp, fn_, tp| -> Result<[f64; 4], String> {
        let r = report(&ConfusionMatrix { tn, fp, fn_, tp }).map_err(err)?;
        Ok([r.accuracy, r.weighted_recall, r.weighted_precision, r.weighted_f1].map(round3))
    };
    let dndf = weighted(405, 31, 96, 43)?;
    // Accuracy only depends on the correct count; the errors are split arbitrarily.
    let a1 = weighted(418, 100, 25, 32)?[0];
    let a4 = weighted(100, 30, 37, 51)?[0];
    ensure(
        dndf == [0.779, 0.779, 0.753, 0.753] && a1 == 0.783 && a4 == 0.693,
        format!("405/31/96/43 -> {dndf:?}, 450/575 -> {a1}, 151/218 -> {a4}"),
    )
}

fn recall_identity() -> Outcome {
    let mut rng = seeded_rng(2024);
    for i in 0..1000 {
        let c: [u64; 4] = std::array::from_fn(|_| rng.gen_range(0..500));
        let [tn, fp, fn_, tp] = c;
        if c.iter().sum::<u64>() == 0 {
            continue;
        }
        // Σ_c support_c · (hits_c / support_c) / total as one exact fraction.
        let (mut num, mut den) = (0u128, 1u128);
        for (hits, support) in [(tn, tn + fp), (tp, tp + fn_)] {
            if support > 0 {
                let (h, s) = (u128::from(hits), u128::from(support));
                num = num * s + u128::from(support) * h * den;
                den *= s;
            }
        }
        let correct = u128::from(tn + tp);
        if num != correct * den {
            return Err(format!("matrix {i} {c:?}: exact weighted recall differs from accuracy"));
        }
        let r = report(&ConfusionMatrix { tn, fp, fn_, tp }).map_err(err)?;
        if (r.weighted_recall - r.accuracy).abs() > 1e-15 {
            return Err(format!("matrix {i} {c:?}: {} vs {}", r.weighted_recall, r.accuracy));
        }
    }
    Ok("1000 matrices".into())
}

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let trials = 100;
    let kernels = kernel_gradients(trials).map_err(err)?;
    let tree = tree_gradients(trials).map_err(err)?;
    let forest = forest_gradients(trials).map_err(err)?;
    let elapsed = started.elapsed();
    let (name, worst_kernel) = kernels.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let worst = worst_kernel.max(tree).max(forest);
    ensure(
        worst < FD_TOLERANCE && elapsed < Duration::from_secs(60),
        format!(
            "{} kernels + depth-3 tree + 2-tree forest, {trials} trials each, worst {worst:.2e} (kernel {name} {worst_kernel:.2e}, tree {tree:.2e}, forest {forest:.2e}), {:.1}s",
            kernels.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn reach_normalisation() -> Outcome {
    let d = leaf_reach_deviation(1000).map_err(err)?;
    ensure(d < 1e-9, format!("1000 pairs, depths 1-10, worst |sum - 1| = {d:.2e}"))
}

fn forest_averaging() -> Outcome {
    let cloned = cloned_forest_is_exact(&[2, 3, 7, 25]).map_err(err)?;
    let cfg = ForestConfig::single_tree(5, 13);
    let m = init_forest(&cfg).map_err(err)?;
    let tree = init_tree(&cfg.tree_config(0)).map_err(err)?;
    let x = Tensor::new(vec![6, 5], (0..30).map(|i| f64::from(i) / 29.0).collect()).map_err(err)?;
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let single = bits(&forest_forward(&m, &x).map_err(err)?) == bits(&tree_forward(&tree, &x).map_err(err)?.1);
    ensure(cloned && single, format!("cloned 2/3/7/25 trees exact: {cloned}, 1-tree forest equals tree: {single}"))
}

/// Exhaustive CART: every (feature, midpoint) split scored by exact weighted Gini.
fn oracle_cart(rows: &[[i64; 2]], y: &[u8], idx: &[usize], q: [f64; 2]) -> u8 {
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    let leaf = u8::from(2 * ones >= idx.len());
    if idx.len() < 2 || ones == 0 || ones == idx.len() {
        return leaf;
    }
    // Score = Σ_child (n_c² − a² − b²)/n_c, compared as fractions; thresholds doubled to stay integral.
    let mut best: Option<((i128, i128), usize, i64)> = None;
    for f in [0, 1] {
        let mut vals: Vec<i64> = idx.iter().map(|&i| rows[i][f]).collect();
        vals.sort_unstable();
        vals.dedup();
        for w in vals.windows(2) {
            let t2 = w[0] + w[1];
            let (mut l, mut r) = ([0i128; 2], [0i128; 2]);
            for &i in idx {
                let side = if 2 * rows[i][f] <= t2 { &mut l } else { &mut r };
                side[usize::from(y[i])] += 1;
            }
            let imp = |c: [i128; 2]| (c[0] + c[1]).pow(2) - c[0] * c[0] - c[1] * c[1];
            let (nl, nr) = (l[0] + l[1], r[0] + r[1]);
            let score = (imp(l) * nr + imp(r) * nl, nl * nr);
            if best.is_none_or(|(b, _, _)| score.0 * b.1 < b.0 * score.1) {
                best = Some((score, f, t2));
            }
        }
    }
    let Some((_, f, t2)) = best else { return leaf };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| 2 * rows[i][f] <= t2);
    let side = if 2.0 * q[f] <= t2 as f64 { l } else { r };
    oracle_cart(rows, y, &side, q)
}

/// Brute-force KNN: sort every training point by (distance, index).
fn oracle_knn(rows: &[[i64; 2]], y: &[u8], k: usize, q: [f64; 2]) -> u8 {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let d = |i: usize| (rows[i][0] as f64 - q[0]).powi(2) + (rows[i][1] as f64 - q[1]).powi(2);
    order.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
    let k = k.min(rows.len());
    let ones = order[..k].iter().filter(|&&i| y[i] == 1).count();
    match (2 * ones).cmp(&k) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => y[order[0]],
    }
}

fn baseline_oracles() -> Outcome {
    let mut rng = seeded_rng(99);
    let mut instances = 0;
    for _ in 0..250 {
        let n = rng.gen_range(1..=8);
        let rows: Vec<[i64; 2]> = (0..n).map(|_| [rng.gen_range(0..4), rng.gen_range(0..4)]).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let x = Tensor::from_rows(&rows.iter().map(|r| r.map(|v| v as f64)).collect::<Vec<_>>()).map_err(err)?;
        let cart = CartTreeModel::fit(&x, &y).map_err(err)?;
        let knn = KnnModel::fit(&x, &y, 5).map_err(err)?;
        let all: Vec<usize> = (0..n).collect();
        for a in 0..9 {
            for b in 0..9 {
                let q = [f64::from(a) * 0.5 - 0.5, f64::from(b) * 0.5 - 0.5];
                if cart.predict_row(&q) != oracle_cart(&rows, &y, &all, q) {
                    return Err(format!("CART differs on {rows:?} {y:?} at {q:?}"));
                }
                let got = knn.predict(&Tensor::from_rows(&[q]).map_err(err)?).map_err(err)?[0];
                if got != oracle_knn(&rows, &y, 5, q) {
                    return Err(format!("KNN differs on {rows:?} {y:?} at {q:?}"));
                }
            }
        }
        instances += 1;
    }

    // Means 0.5 / 10.5, population variance 0.25, priors 1/2.
    let gnb = GaussianNBModel::fit(&Tensor::from_rows(&[[0.0], [1.0], [10.0], [11.0]]).map_err(err)?, &[0, 0, 1, 1])
        .map_err(err)?;
    let at = 0.5f64;
    let expect = |mean: f64| 0.5f64.ln() - 0.5 * (2.0 * std::f64::consts::PI * 0.25).ln() - (at - mean).powi(2) / 0.5;
    let gnb_ok = (gnb.log_joint(&[at], 0) - expect(0.5)).abs() < 1e-12
        && (gnb.log_joint(&[at], 1) - expect(10.5)).abs() < 1e-9
        && gnb.predict(&Tensor::from_rows(&[[at], [10.0]]).map_err(err)?).map_err(err)? == [0, 1];
    let alpha = stage_weight(0.25);
    let ada_ok = (alpha - 0.5 * 3f64.ln()).abs() < 1e-12;
    ensure(
        gnb_ok && ada_ok,
        format!("{instances} CART/KNN instances x 81 queries, GNB 4-point: {gnb_ok}, AdaBoost alpha(0.25) = {alpha}"),
    )
}

fn pipeline_counts() -> Outcome {
    let c = generate_synthetic(&SyntheticCohortSpec::default()).map_err(err)?;
    let dm = encode_features(&c, &select_by_frequency(&c, 0.1).map_err(err)?).map_err(err)?;
    let mut sizes = Vec::new();
    for stage in Stage::ALL {
        let view = stage_view(&dm, stage).map_err(err)?;
        sizes.push(stratified_split(&view, 0.2, 7).map_err(err)?.test.n_rows());
    }
    ensure(c.len() == 2875 && sizes == [575, 575, 358, 218], format!("{} rows, stage test sizes {sizes:?}", c.len()))
}

fn feature_selection() -> Outcome {
    let spec = SyntheticCohortSpec::default();
    let c = generate_synthetic(&spec).map_err(err)?;
    let names: Vec<String> = select_by_frequency(&c, 0.1).map_err(err)?.names().iter().map(|s| s.to_string()).collect();
    let table = [
        "test_result",
        "confirmation_method",
        "age",
        "ventilator",
        "cough",
        "apnea",
        "carcinoma",
        "healthcare_staff",
        "icu_hospitalization",
    ];
    let mut planted = Vec::new();
    for (name, _) in &spec.rare_symptom_columns {
        let freq =
            c.records().iter().filter(|r| r.extra_symptoms.get(name) == Some(&true)).count() as f64 / c.len() as f64;
        planted.push(format!("{name} {freq:.3}"));
        if freq >= 0.1 || names.contains(name) {
            return Err(format!("planted column {name} (frequency {freq}) was not dropped"));
        }
    }
    ensure(names == table, format!("kept {names:?}; dropped {}", planted.join(", ")))
}

fn end_to_end(dir: &Path) -> Outcome {
    let cfg = ExperimentConfig { out_dir: dir.to_path_buf(), ..Default::default() };
    let started = Instant::now();
    let out = run_all(&cfg).map_err(err)?;
    let elapsed = started.elapsed();
    let s1 = out.results.iter().find(|r| r.stage == Stage::S1).ok_or("no stage 1 result")?;
    let dndf = s1.model(ModelKind::Dndf).ok_or("no DNDF result")?;
    let log = dndf.training_log.as_ref().ok_or("no training log")?;
    let (first, last) = (log[0], log[log.len() - 1]);
    let acc = dndf.metrics.accuracy;
    ensure(
        out.results.len() == 4
            && out.results.iter().all(|r| r.models.len() == 9)
            && acc > s1.majority_rate()
            && log.len() == 30
            && last < 0.8 * first
            && elapsed < Duration::from_secs(15 * 60),
        format!(
            "stage 1 DNDF accuracy {acc:.4} vs majority {:.4}; BCE epoch 1 {first:.4}, epoch {} {last:.4} (ratio {:.3}); 4 stages x 9 models in {:.0}s",
            s1.majority_rate(),
            log.len(),
            last / first,
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism(root: &Path) -> Outcome {
    let quick = |p: NeuralParams| NeuralParams { num_trees: p.num_trees.min(4), depth: 4, epochs: 3, ..p };
    let mut cfg = ExperimentConfig::default();
    cfg.dndf = quick(cfg.dndf);
    cfg.dndt = quick(cfg.dndt);
    let (a, b) = (root.join("a"), root.join("b"));
    for dir in [&a, &b] {
        cfg.out_dir = dir.clone();
        run_all(&cfg).map_err(err)?;
    }
    let manifest: dndf::runner::RunManifest =
        serde_json::from_slice(&std::fs::read(a.join(MANIFEST_FILE)).map_err(err)?).map_err(err)?;
    let mut compared = 0;
    for rel in manifest.outputs.keys().map(String::as_str).chain([MANIFEST_FILE]) {
        if std::fs::read(a.join(rel)).map_err(err)? != std::fs::read(b.join(rel)).map_err(err)? {
            return Err(format!("{rel} differs between runs"));
        }
        compared += 1;
    }

    let data = prepare_data(&cfg).map_err(err)?;
    let stage = run_stage(&cfg, &data, Stage::S1).map_err(err)?;
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    for (kind, model, seeds) in &stage.models {
        let bytes = model_to_bytes(model, seeds, &stage.result.features).map_err(err)?;
        let (back, _) = model_from_bytes(&bytes).map_err(err)?;
        if bits(&forest_forward(&back, &data.design.x).map_err(err)?)
            != bits(&forest_forward(model, &data.design.x).map_err(err)?)
        {
            return Err(format!("{kind} forward output changed after save/load"));
        }
    }
    Ok(format!(
        "{compared} files byte-identical across two runs; {} models reload with bit-identical outputs on {} rows",
        stage.models.len(),
        data.design.n_rows()
    ))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let full = tmp.path().join("full");
    let repeat = tmp.path().join("repeat");
    let criteria: Vec<Criterion> = vec![
        ("metric oracle", Box::new(metric_oracle)),
        ("weighted recall equals accuracy", Box::new(recall_identity)),
        ("gradient suite", Box::new(gradient_suite)),
        ("leaf reach normalisation", Box::new(reach_normalisation)),
        ("forest averaging", Box::new(forest_averaging)),
        ("baseline oracles", Box::new(baseline_oracles)),
        ("pipeline counts", Box::new(pipeline_counts)),
        ("feature selection", Box::new(feature_selection)),
        ("end-to-end learning", Box::new(move || end_to_end(&full))),
        ("determinism", Box::new(move || determinism(&repeat))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name} [{:.1}s]: {detail}", i + 1, started.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
