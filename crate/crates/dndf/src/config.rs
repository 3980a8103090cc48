//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dndf_core::baselines::BaselineKind;
use dndf_core::dataset::SyntheticCohortSpec;
use dndf_core::forest::ForestConfig;
use dndf_core::numcore::AdamConfig;
use dndf_core::preprocess::{Stage, DEFAULT_SELECTION_THRESHOLD};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Result, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// A cohort file in the comma-separated format.
    Path(PathBuf),
    Synthetic(SyntheticCohortSpec),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticCohortSpec::default())
    }
}

/// The nine models, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gnb,
    Knn,
    Logreg,
    Cart,
    Rf,
    Svm,
    Adaboost,
    Dndt,
    Dndf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Gnb,
        ModelKind::Knn,
        ModelKind::Logreg,
        ModelKind::Cart,
        ModelKind::Rf,
        ModelKind::Svm,
        ModelKind::Adaboost,
        ModelKind::Dndt,
        ModelKind::Dndf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dndt => "dndt",
            ModelKind::Dndf => "dndf",
            other => other.baseline().unwrap().as_str(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Dndt => "Deep Neural Decision Tree",
            ModelKind::Dndf => "Deep Neural Decision Forest",
            other => other.baseline().unwrap().display_name(),
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        Some(match self {
            ModelKind::Gnb => BaselineKind::Gnb,
            ModelKind::Knn => BaselineKind::Knn,
            ModelKind::Logreg => BaselineKind::LogReg,
            ModelKind::Cart => BaselineKind::Cart,
            ModelKind::Rf => BaselineKind::Rf,
            ModelKind::Svm => BaselineKind::Svm,
            ModelKind::Adaboost => BaselineKind::AdaBoost,
            ModelKind::Dndt | ModelKind::Dndf => return None,
        })
    }

    pub fn is_neural(self) -> bool {
        self.baseline().is_none()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| RunError::Config(format!("unknown model `{s}`")))
    }
}

/// Hyperparameters of a jointly trained forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralParams {
    pub num_trees: usize,
    pub depth: usize,
    pub used_features_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Deceased-class probability at or above which class 1 is predicted.
    pub threshold: f64,
}

impl NeuralParams {
    pub fn forest() -> Self {
        Self::from_config(&ForestConfig::new(1, 0))
    }

    pub fn tree() -> Self {
        Self::from_config(&ForestConfig::single_tree(1, 0))
    }

    fn from_config(c: &ForestConfig) -> Self {
        NeuralParams {
            num_trees: c.num_trees,
            depth: c.depth,
            used_features_rate: c.used_features_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.adam.learning_rate,
            threshold: 0.5,
        }
    }

    pub fn forest_config(&self, n_features: usize, seed: u64) -> ForestConfig {
        ForestConfig {
            num_trees: self.num_trees,
            depth: self.depth,
            used_features_rate: self.used_features_rate,
            n_features,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() },
            seed,
        }
    }
}

impl Default for NeuralParams {
    fn default() -> Self {
        Self::forest()
    }
}

/// The keys present in a `[dndf]` or `[dndt]` table.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuralOverrides {
    num_trees: Option<usize>,
    depth: Option<usize>,
    used_features_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    threshold: Option<f64>,
}

impl NeuralOverrides {
    fn apply(self, base: NeuralParams) -> NeuralParams {
        NeuralParams {
            num_trees: self.num_trees.unwrap_or(base.num_trees),
            depth: self.depth.unwrap_or(base.depth),
            used_features_rate: self.used_features_rate.unwrap_or(base.used_features_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            threshold: self.threshold.unwrap_or(base.threshold),
        }
    }
}

/// Keys missing from `[dndf]` keep the forest defaults.
fn forest_overrides<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NeuralParams, D::Error> {
    Ok(NeuralOverrides::deserialize(d)?.apply(NeuralParams::forest()))
}

/// Keys missing from `[dndt]` keep the single-tree defaults.
fn tree_overrides<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NeuralParams, D::Error> {
    Ok(NeuralOverrides::deserialize(d)?.apply(NeuralParams::tree()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub knn_k: usize,
    pub logreg_learning_rate: f64,
    pub logreg_iterations: usize,
    pub rf_trees: usize,
    pub adaboost_rounds: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            knn_k: 5,
            logreg_learning_rate: 0.1,
            logreg_iterations: 1000,
            rf_trees: 100,
            adaboost_rounds: 50,
            svm_lambda: 1e-4,
            svm_epochs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub stages: Vec<Stage>,
    pub models: Vec<ModelKind>,
    pub seed: u64,
    pub test_fraction: f64,
    pub selection_threshold: f64,
    #[serde(deserialize_with = "forest_overrides")]
    pub dndf: NeuralParams,
    #[serde(deserialize_with = "tree_overrides")]
    pub dndt: NeuralParams,
    pub baselines: BaselineParams,
    /// Not part of the experiment itself; left out of the manifest echo.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::default(),
            stages: Stage::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            seed: 7,
            test_fraction: 0.2,
            selection_threshold: DEFAULT_SELECTION_THRESHOLD,
            dndf: NeuralParams::forest(),
            dndt: NeuralParams::tree(),
            baselines: BaselineParams::default(),
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(RunError::io(path))?;
        Self::from_toml_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Stages and models are sorted into report order and deduplicated.
    pub fn normalized(mut self) -> Self {
        self.stages.sort();
        self.stages.dedup();
        self.models.sort();
        self.models.dedup();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.stages.is_empty() {
            return bad("at least one stage must be selected".into());
        }
        if self.models.is_empty() {
            return bad("at least one model must be selected".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} not in (0, 1)", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.selection_threshold) {
            return bad(format!("selection_threshold {} not in [0, 1]", self.selection_threshold));
        }
        for (name, p) in [("dndf", &self.dndf), ("dndt", &self.dndt)] {
            p.forest_config(1, 0).validate().map_err(|e| RunError::Config(format!("{name}: {e}")))?;
            if !(0.0..=1.0).contains(&p.threshold) {
                return bad(format!("{name}: threshold {} not in [0, 1]", p.threshold));
            }
        }
        let b = &self.baselines;
        if b.knn_k == 0 || b.rf_trees == 0 || b.adaboost_rounds == 0 || b.svm_epochs == 0 {
            return bad("baseline counts must be at least 1".into());
        }
        if !(b.svm_lambda > 0.0 && b.logreg_learning_rate > 0.0) {
            return bad("svm_lambda and logreg_learning_rate must be positive".into());
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }
}
