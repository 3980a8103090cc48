use dndf::model_io::{load_model, load_model_with_header, model_from_bytes, model_to_bytes, save_model, ModelSeeds};
use dndf::RunError;
use dndf_core::forest::{forest_forward, init_forest, train, ForestConfig};
use dndf_core::{seeded_rng, Tensor};
use rand::Rng;

fn trained() -> dndf_core::forest::ForestModel {
    let cfg = ForestConfig { num_trees: 3, depth: 3, epochs: 2, ..ForestConfig::new(4, 11) };
    let mut rng = seeded_rng(2);
    let x = Tensor::new(vec![40, 4], (0..160).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let y: Vec<u8> = (0..40).map(|i| u8::from(x.at(i, 0) > 0.5)).collect();
    train(init_forest(&cfg).unwrap(), &x, &y).unwrap()
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn save_and_load_is_bit_exact() {
    let m = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&m, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.config, m.config);
    assert_eq!(back.trees.len(), m.trees.len());
    for (a, b) in back.trees.iter().zip(&m.trees) {
        assert_eq!(a.feature_mask, b.feature_mask);
        assert_eq!(bits(&a.w), bits(&b.w));
        assert_eq!(bits(&a.b), bits(&b.b));
        assert_eq!(bits(&a.pi_logits), bits(&b.pi_logits));
    }
    let log_bits = |l: &[f64]| l.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(log_bits(&back.training_log), log_bits(&m.training_log));
    let x = Tensor::new(vec![5, 4], (0..20).map(|i| f64::from(i) / 20.0).collect()).unwrap();
    assert_eq!(bits(&forest_forward(&back, &x).unwrap()), bits(&forest_forward(&m, &x).unwrap()));
}

#[test]
fn header_keeps_seeds_and_features() {
    let m = trained();
    let seeds = ModelSeeds { model: 99, split: Some(7) };
    let features: Vec<String> = ["age", "sex", "cough", "apnea"].map(String::from).to_vec();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, model_to_bytes(&m, &seeds, &features).unwrap()).unwrap();
    let (_, header) = load_model_with_header(&path).unwrap();
    assert_eq!(header.seeds, seeds);
    assert_eq!(header.features, features);
    assert_eq!(header.version, 1);
}

#[test]
fn serialisation_is_deterministic() {
    let m = trained();
    let s = ModelSeeds::default();
    assert_eq!(model_to_bytes(&m, &s, &[]).unwrap(), model_to_bytes(&m, &s, &[]).unwrap());
}

#[test]
fn truncated_file_is_a_format_error() {
    let bytes = model_to_bytes(&trained(), &ModelSeeds::default(), &[]).unwrap();
    for cut in [0, 10, bytes.len() / 2, bytes.len() - 3] {
        let err = model_from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, RunError::ModelFormat(_)), "cut {cut}: {err:?}");
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn unknown_version_is_rejected() {
    let bytes = model_to_bytes(&trained(), &ModelSeeds::default(), &[]).unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    v["header"]["version"] = 2.into();
    let err = model_from_bytes(&serde_json::to_vec(&v).unwrap()).unwrap_err();
    assert!(matches!(err, RunError::ModelVersion { found: 2, expected: 1 }), "{err:?}");
}

#[test]
fn tampered_parameters_fail_the_digest() {
    let bytes = model_to_bytes(&trained(), &ModelSeeds::default(), &[]).unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    let bits = v["params"]["trees"][0]["w"]["bits"].as_str().unwrap().to_string();
    let flipped = if bits.starts_with('3') { bits.replacen('3', "4", 1) } else { format!("3{}", &bits[1..]) };
    v["params"]["trees"][0]["w"]["bits"] = flipped.into();
    let err = model_from_bytes(&serde_json::to_vec(&v).unwrap()).unwrap_err();
    assert!(matches!(err, RunError::ModelDigest { .. }), "{err:?}");
}

#[test]
fn wrong_format_tag_is_rejected() {
    let err = model_from_bytes(br#"{"header": {"format": "other", "version": 1}}"#).unwrap_err();
    assert!(matches!(err, RunError::ModelFormat(_)));
}
