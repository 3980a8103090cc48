//! Versioned model files.
//!
//! A model file is JSON with a header (format tag, version, forest config,
//! seeds, feature names), the parameter arrays with every 64-bit real
//! stored as the big-endian hex of its bits, and a SHA-256 digest of the
//! header and parameters.

use std::path::Path;

use dndf_core::forest::{ForestConfig, ForestModel};
use dndf_core::ndt::TreeParams;
use dndf_core::Tensor;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, RunError};

pub const MODEL_FORMAT: &str = "dndf-model";
pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSeeds {
    /// Seed the forest was initialised and shuffled with.
    pub model: u64,
    /// Seed of the train/test split the model was trained on, if any.
    pub split: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u64,
    pub config: ForestConfig,
    pub seeds: ModelSeeds,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct HexTensor {
    shape: Vec<usize>,
    bits: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TreeRecord {
    feature_mask: Vec<usize>,
    w: HexTensor,
    b: HexTensor,
    pi_logits: HexTensor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Params {
    trees: Vec<TreeRecord>,
    training_log: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    header: ModelHeader,
    params: Params,
    digest: String,
}

fn hex_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_bits().to_be_bytes()).collect();
    hex::encode(bytes)
}

fn unhex_f64s(s: &str, what: &str) -> Result<Vec<f64>> {
    let bad = || RunError::ModelFormat(format!("{what}: malformed parameter data"));
    let bytes = hex::decode(s).map_err(|_| bad())?;
    if bytes.len() % 8 != 0 {
        return Err(bad());
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_bits(u64::from_be_bytes(c.try_into().unwrap()))).collect())
}

fn to_hex(t: &Tensor) -> HexTensor {
    HexTensor { shape: t.shape().to_vec(), bits: hex_f64s(t.data()) }
}

fn from_hex(h: &HexTensor, what: &str) -> Result<Tensor> {
    Tensor::new(h.shape.clone(), unhex_f64s(&h.bits, what)?).map_err(|e| RunError::ModelFormat(format!("{what}: {e}")))
}

fn digest(header: &ModelHeader, params: &Params) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(header)?);
    h.update(serde_json::to_vec(params)?);
    Ok(hex::encode(h.finalize()))
}

pub fn model_to_bytes(m: &ForestModel, seeds: &ModelSeeds, features: &[String]) -> Result<Vec<u8>> {
    let header = ModelHeader {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: m.config,
        seeds: seeds.clone(),
        features: features.to_vec(),
    };
    let params = Params {
        trees: m
            .trees
            .iter()
            .map(|t| TreeRecord {
                feature_mask: t.feature_mask.clone(),
                w: to_hex(&t.w),
                b: to_hex(&t.b),
                pi_logits: to_hex(&t.pi_logits),
            })
            .collect(),
        training_log: hex_f64s(&m.training_log),
    };
    let digest = digest(&header, &params)?;
    let mut out = serde_json::to_vec_pretty(&ModelFile { header, params, digest })?;
    out.push(b'\n');
    Ok(out)
}

/// Parses a model file, checking format tag, version and digest before
/// building anything.
pub fn model_from_bytes(bytes: &[u8]) -> Result<(ForestModel, ModelHeader)> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| RunError::ModelFormat(format!("not a complete model file: {e}")))?;
    let header = value.get("header").ok_or_else(|| RunError::ModelFormat("missing header".into()))?;
    if header.get("format").and_then(Value::as_str) != Some(MODEL_FORMAT) {
        return Err(RunError::ModelFormat(format!("format tag is not `{MODEL_FORMAT}`")));
    }
    let version =
        header.get("version").and_then(Value::as_u64).ok_or_else(|| RunError::ModelFormat("missing version".into()))?;
    if version != MODEL_VERSION {
        return Err(RunError::ModelVersion { found: version, expected: MODEL_VERSION });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| RunError::ModelFormat(e.to_string()))?;
    let computed = digest(&file.header, &file.params)?;
    if computed != file.digest {
        return Err(RunError::ModelDigest { stored: file.digest, computed });
    }

    let cfg = file.header.config;
    let mut trees = Vec::with_capacity(file.params.trees.len());
    for (i, t) in file.params.trees.iter().enumerate() {
        let what = format!("tree {i}");
        let tree = TreeParams {
            feature_mask: t.feature_mask.clone(),
            n_features: cfg.n_features,
            w: from_hex(&t.w, &what)?,
            b: from_hex(&t.b, &what)?,
            pi_logits: from_hex(&t.pi_logits, &what)?,
        };
        tree.validate().map_err(|e| RunError::ModelFormat(format!("{what}: {e}")))?;
        trees.push(tree);
    }
    if trees.len() != cfg.num_trees {
        return Err(RunError::ModelFormat(format!("{} trees stored, config says {}", trees.len(), cfg.num_trees)));
    }
    let training_log = unhex_f64s(&file.params.training_log, "training log")?;
    Ok((ForestModel { config: cfg, trees, training_log }, file.header))
}

pub fn save_model_with(m: &ForestModel, seeds: &ModelSeeds, features: &[String], path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(m, seeds, features)?).map_err(RunError::io(path))
}

pub fn save_model(m: &ForestModel, path: &Path) -> Result<()> {
    let seeds = ModelSeeds { model: m.config.seed, split: None };
    save_model_with(m, &seeds, &[], path)
}

pub fn load_model_with_header(path: &Path) -> Result<(ForestModel, ModelHeader)> {
    let bytes = std::fs::read(path).map_err(RunError::io(path))?;
    model_from_bytes(&bytes)
}

pub fn load_model(path: &Path) -> Result<ForestModel> {
    load_model_with_header(path).map(|(m, _)| m)
}
