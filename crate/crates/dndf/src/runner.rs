//! The staged experiment: data → selection → encoding → stage view →
//! stratified split → train-only scaling → nine models → metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dndf_core::baselines::*;
use dndf_core::dataset::{generate_synthetic, Cohort};
use dndf_core::forest::{init_forest, predict, train, ForestModel};
use dndf_core::metrics::{confusion_matrix, report, ClassificationReport, ConfusionMatrix};
use dndf_core::preprocess::{
    encode_features, select_by_frequency, stage_view, stratified_split, DesignMatrix, MinMaxScaler, Stage,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort_io::{cohort_to_bytes, load_cohort};
use crate::config::{DataSource, ExperimentConfig, ModelKind};
use crate::error::{Result, RunError};
use crate::model_io::{model_to_bytes, ModelSeeds};
use crate::report::{render_text, results_to_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub name: String,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: ClassificationReport,
    /// Mean training loss per epoch, for the neural models.
    pub training_log: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: Stage,
    pub description: String,
    pub features: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// [recovered, deceased]
    pub train_class_counts: [usize; 2],
    pub test_class_counts: [usize; 2],
    pub split_seed: u64,
    pub models: Vec<ModelResult>,
}

impl StageResult {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.model == kind)
    }

    /// Test accuracy of always predicting the larger class.
    pub fn majority_rate(&self) -> f64 {
        let [a, b] = self.test_class_counts;
        a.max(b) as f64 / (a + b) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTiming {
    pub stage: Stage,
    pub model: ModelKind,
    pub seconds: f64,
}

/// Everything one stage produced.
pub struct StageOutput {
    pub result: StageResult,
    pub models: Vec<(ModelKind, ForestModel, ModelSeeds)>,
    pub timings: Vec<ModelTiming>,
}

pub fn stage_description(stage: Stage) -> &'static str {
    match stage {
        Stage::S1 => "all selected features",
        Stage::S2 => "without test result and confirmation method",
        Stage::S3 => "clinically confirmed rows only",
        Stage::S4 => "RT-PCR confirmed rows only",
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one model in one stage, derived from the global seed.
pub fn model_seed(global: u64, stage: Stage, model: ModelKind) -> u64 {
    let s = Stage::ALL.iter().position(|&x| x == stage).unwrap() as u64;
    let m = ModelKind::ALL.iter().position(|&x| x == model).unwrap() as u64;
    mix(global ^ mix(((s + 1) << 8) | (m + 1)))
}

/// The cohort and its encoded design matrix, shared by all stages.
pub struct PreparedData {
    pub cohort: Cohort,
    /// Canonical comma-separated rendering of the cohort.
    pub cohort_bytes: Vec<u8>,
    pub input_digest: String,
    pub design: DesignMatrix,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (cohort, input_digest, cohort_bytes) = match &cfg.data {
        DataSource::Path(p) => {
            let raw = std::fs::read(p).map_err(RunError::io(p))?;
            let cohort = load_cohort(p)?;
            let bytes = cohort_to_bytes(&cohort)?;
            (cohort, sha256_hex(&raw), bytes)
        }
        DataSource::Synthetic(spec) => {
            let cohort = generate_synthetic(spec)?;
            let bytes = cohort_to_bytes(&cohort)?;
            (cohort, sha256_hex(&bytes), bytes)
        }
    };
    let schema = select_by_frequency(&cohort, cfg.selection_threshold)?;
    let design = encode_features(&cohort, &schema)?;
    Ok(PreparedData { cohort, cohort_bytes, input_digest, design })
}

fn fit_baseline(
    cfg: &ExperimentConfig,
    kind: BaselineKind,
    x: &dndf_core::Tensor,
    y: &[u8],
    seed: u64,
) -> Result<Box<dyn Classifier>> {
    let b = &cfg.baselines;
    Ok(match kind {
        BaselineKind::Gnb => Box::new(GaussianNBModel::fit(x, y)?),
        BaselineKind::Knn => Box::new(KnnModel::fit(x, y, b.knn_k)?),
        BaselineKind::LogReg => Box::new(LogisticRegressionModel::fit(
            x,
            y,
            &LogisticRegressionParams { learning_rate: b.logreg_learning_rate, iterations: b.logreg_iterations },
        )?),
        BaselineKind::Cart => Box::new(CartTreeModel::fit(x, y)?),
        BaselineKind::Rf => Box::new(RandomForestModel::fit(
            x,
            y,
            &RandomForestParams { n_trees: b.rf_trees, seed, ..Default::default() },
        )?),
        BaselineKind::Svm => {
            Box::new(LinearSvmModel::fit(x, y, &LinearSvmParams { lambda: b.svm_lambda, epochs: b.svm_epochs, seed })?)
        }
        BaselineKind::AdaBoost => Box::new(AdaBoostModel::fit(x, y, &AdaBoostParams { n_rounds: b.adaboost_rounds })?),
    })
}

pub fn run_stage(cfg: &ExperimentConfig, data: &PreparedData, stage: Stage) -> Result<StageOutput> {
    let wrap = |e: RunError| RunError::Stage { stage, source: Box::new(e) };
    run_stage_inner(cfg, data, stage).map_err(wrap)
}

fn run_stage_inner(cfg: &ExperimentConfig, data: &PreparedData, stage: Stage) -> Result<StageOutput> {
    let view = stage_view(&data.design, stage)?;
    let split_seed = cfg.seed;
    let mut split = stratified_split(&view, cfg.test_fraction, split_seed)?;
    let counts = split.train.class_counts();
    if counts.contains(&0) {
        return Err(dndf_core::Error::Training(format!(
            "training split has {} recovered and {} deceased rows",
            counts[0], counts[1]
        ))
        .into());
    }
    let scaler = MinMaxScaler::fit(&split.train)?;
    scaler.transform(&mut split.train);
    scaler.transform(&mut split.test);
    let (train_set, test_set) = (&split.train, &split.test);
    let features: Vec<String> = train_set.schema.names().iter().map(|s| s.to_string()).collect();

    let mut out = StageOutput {
        result: StageResult {
            stage,
            description: stage_description(stage).to_string(),
            features: features.clone(),
            n_train: train_set.n_rows(),
            n_test: test_set.n_rows(),
            train_class_counts: counts,
            test_class_counts: test_set.class_counts(),
            split_seed,
            models: Vec::new(),
        },
        models: Vec::new(),
        timings: Vec::new(),
    };
    for &kind in &cfg.models {
        let seed = model_seed(cfg.seed, stage, kind);
        let started = Instant::now();
        let (pred, training_log) = match kind.baseline() {
            Some(b) => {
                let model = fit_baseline(cfg, b, &train_set.x, &train_set.y, seed)?;
                (model.predict(&test_set.x)?, None)
            }
            None => {
                let params = if kind == ModelKind::Dndf { &cfg.dndf } else { &cfg.dndt };
                let fc = params.forest_config(train_set.n_cols(), seed);
                let model = train(init_forest(&fc)?, &train_set.x, &train_set.y)?;
                let pred = predict(&model, &test_set.x, params.threshold)?;
                let log = model.training_log.clone();
                out.models.push((kind, model, ModelSeeds { model: seed, split: Some(split_seed) }));
                (pred, Some(log))
            }
        };
        let cm = confusion_matrix(&test_set.y, &pred)?;
        out.result.models.push(ModelResult {
            model: kind,
            name: kind.display_name().to_string(),
            seed,
            confusion: cm,
            metrics: report(&cm)?,
            training_log,
        });
        out.timings.push(ModelTiming { stage, model: kind, seconds: started.elapsed().as_secs_f64() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub kind: String,
    pub path: Option<PathBuf>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: Stage,
    pub status: String,
    pub error: Option<String>,
    /// Index into `stages` of the results file, when the stage completed.
    pub results_index: Option<usize>,
    pub model_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    /// The configuration, minus the output directory.
    pub config: serde_json::Value,
    pub input: InputRecord,
    pub results_file: String,
    pub report_file: String,
    pub stages: Vec<StageEntry>,
    /// sha256 of every output file except the manifest and timings, by relative path.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub results: Vec<StageResult>,
    pub manifest: RunManifest,
    pub timings: Vec<ModelTiming>,
}

pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const COHORT_FILE: &str = "cohort.csv";

fn write_file(dir: &Path, rel: &str, bytes: &[u8], digests: &mut BTreeMap<String, String>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(RunError::io(parent))?;
    }
    std::fs::write(&path, bytes).map_err(RunError::io(&path))?;
    digests.insert(rel.to_string(), sha256_hex(bytes));
    Ok(())
}

/// Runs the selected stages in order and writes results, report, models,
/// timings and finally the manifest into `cfg.out_dir`.
///
/// A failing stage stops the run; stages completed before it are still
/// written, and the manifest records the failure.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let cfg = cfg.clone().normalized();
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(RunError::io(&dir))?;
    let data = prepare_data(&cfg)?;
    let mut digests = BTreeMap::new();

    let input = match &cfg.data {
        DataSource::Path(p) => {
            InputRecord { kind: "file".into(), path: Some(p.clone()), sha256: data.input_digest.clone() }
        }
        DataSource::Synthetic(_) => {
            write_file(&dir, COHORT_FILE, &data.cohort_bytes, &mut digests)?;
            InputRecord { kind: "synthetic".into(), path: Some(COHORT_FILE.into()), sha256: data.input_digest.clone() }
        }
    };

    let mut results = Vec::new();
    let mut timings = Vec::new();
    let mut entries = Vec::new();
    let mut failure = None;
    for &stage in &cfg.stages {
        match run_stage(&cfg, &data, stage) {
            Ok(out) => {
                let mut files = Vec::new();
                for (kind, model, seeds) in &out.models {
                    let rel = format!("models/{}_{}.json", stage, kind);
                    write_file(&dir, &rel, &model_to_bytes(model, seeds, &out.result.features)?, &mut digests)?;
                    files.push(rel);
                }
                entries.push(StageEntry {
                    stage,
                    status: "ok".into(),
                    error: None,
                    results_index: Some(results.len()),
                    model_files: files,
                });
                results.push(out.result);
                timings.extend(out.timings);
            }
            Err(e) => {
                entries.push(StageEntry {
                    stage,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    results_index: None,
                    model_files: Vec::new(),
                });
                failure = Some(e);
                break;
            }
        }
    }

    write_file(&dir, RESULTS_FILE, results_to_json(&results)?.as_bytes(), &mut digests)?;
    write_file(&dir, REPORT_FILE, render_text(&results).as_bytes(), &mut digests)?;
    let timing_path = dir.join(TIMINGS_FILE);
    std::fs::write(&timing_path, serde_json::to_vec_pretty(&timings)?).map_err(RunError::io(&timing_path))?;

    let mut config = serde_json::to_value(&cfg)?;
    if let Some(obj) = config.as_object_mut() {
        obj.remove("out_dir");
    }
    let manifest = RunManifest {
        toolkit: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        input,
        results_file: RESULTS_FILE.into(),
        report_file: REPORT_FILE.into(),
        stages: entries,
        outputs: digests,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, bytes).map_err(RunError::io(&manifest_path))?;

    match failure {
        Some(e) => Err(e),
        None => Ok(RunOutput { results, manifest, timings }),
    }
}
